"""Kernel-boundary counter-trace validation for GPU programs."""

from .attacks import AttackKind, AttackSpec, apply_attack
from .errors import KernelScopeError
from .golden import GoldenModel, ValidationPolicy, build_golden
from .gpusim import NoiseSpec, ProgramSpec, sampling_decimate, simulate
from .model import (Category, ConfigTable, Decision, DeviceConfig, EventGroup, EventSpec, KernelMetadata, Sample,
                    Segment, Trace, Verdict)
from .presets import PRESET_NAMES, preset
from .segmentation import MarkerSpec, segment_trace
from .similarity import dtw_similarity, xcorr
from .traceio import read_golden, read_trace, write_golden, write_trace
from .validator import run_campaign, validate_trace

__version__ = "0.1.0"
