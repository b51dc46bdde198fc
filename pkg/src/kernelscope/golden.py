"""Golden reference construction from repeated benign runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InconsistentKernelSequence,
    InvalidModel,
    KernelScopeError,
    NoReferenceForConfig,
    SegmentationFailure,
)
from .model import ConfigTable, DeviceConfig, EventGroup, Trace
from .segmentation import MarkerSpec, segment_trace
from .similarity import channel_flatten


@dataclass(frozen=True)
class ValidationPolicy:
    tau_corr: float = 0.8
    reject_run_len: int = 4
    amplitude_tolerance: float = 0.1
    marker_threshold: int = 1
    min_overlap_frac: float = 0.5

    def __post_init__(self):
        if not 0 < self.tau_corr < 1:
            raise InvalidModel("tau_corr must lie in (0, 1)")
        if self.reject_run_len < 1:
            raise InvalidModel("reject_run_len must be >= 1")


@dataclass(frozen=True, eq=False)
class ReferenceSegment:
    config_id: int
    series: np.ndarray  # [channel, time]
    per_window_spread: np.ndarray  # MAD, same shape
    support: int

    def __post_init__(self):
        series = np.array(self.series, dtype=np.float64)
        spread = np.array(self.per_window_spread, dtype=np.float64)
        if series.ndim != 2 or series.shape[1] < 1:
            raise InvalidModel("reference series must be [channel, time] with time >= 1")
        if spread.shape != series.shape:
            raise InvalidModel("spread must match the series shape")
        if self.support < 1:
            raise InvalidModel("support must be >= 1")
        series.flags.writeable = False
        spread.flags.writeable = False
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "per_window_spread", spread)

    def __len__(self):
        return self.series.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, ReferenceSegment)
            and self.config_id == other.config_id
            and self.support == other.support
            and np.array_equal(self.series, other.series)
            and np.array_equal(self.per_window_spread, other.per_window_spread)
        )


@dataclass(frozen=True, eq=False)
class GoldenModel:
    """Per-configuration references plus everything needed to apply them.

    ``sequence`` is the expected config id of each kernel in program order;
    ``marker`` is bundled so a stored model is self-sufficient.
    """

    group: EventGroup
    device: DeviceConfig
    refs: dict
    config_table: ConfigTable
    policy: ValidationPolicy = field(default_factory=ValidationPolicy)
    sequence: tuple = ()
    marker: Optional[MarkerSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "refs", {int(k): v for k, v in sorted(self.refs.items())})
        object.__setattr__(self, "sequence", tuple(int(c) for c in self.sequence))
        for cid in list(self.refs) + list(self.sequence):
            if cid not in self.config_table:
                raise InvalidModel(f"config id {cid} missing from the config table")

    def __eq__(self, other):
        return (
            isinstance(other, GoldenModel)
            and self.group == other.group
            and self.device == other.device
            and self.refs == other.refs
            and self.config_table == other.config_table
            and self.policy == other.policy
            and self.sequence == other.sequence
            and self.marker == other.marker
        )


def resample(series: np.ndarray, length: int) -> np.ndarray:
    """Linearly interpolate each channel onto ``length`` evenly spaced points."""
    series = np.asarray(series, dtype=np.float64)
    n = series.shape[1]
    if n == length:
        return series.copy()
    if n == 1:
        return np.repeat(series, length, axis=1)
    src = np.linspace(0.0, 1.0, n)
    dst = np.linspace(0.0, 1.0, length)
    return np.stack([np.interp(dst, src, ch) for ch in series])


def robust_reference(stack: np.ndarray) -> tuple:
    """Element-wise median and median absolute deviation over axis 0."""
    med = np.median(stack, axis=0)
    mad = np.median(np.abs(stack - med), axis=0)
    return med, mad


def build_golden(
    traces: Sequence[Trace],
    marker: MarkerSpec,
    config_table: ConfigTable,
    policy: Optional[ValidationPolicy] = None,
) -> GoldenModel:
    """Build one reference per configuration id.

    Every occurrence of a configuration (across traces and, for programs that
    relaunch a kernel, within a trace) is resampled to the median occurrence
    length; the reference is the element-wise median and the spread its MAD.
    """
    policy = policy or ValidationPolicy()
    traces = list(traces)
    if not traces:
        raise InvalidModel("build_golden needs at least one trace")
    group, device = traces[0].group, traces[0].device
    pooled: dict = {}
    sequence = None
    for n, trace in enumerate(traces):
        if trace.group != group or trace.device != device:
            raise InconsistentKernelSequence(f"trace {n} was collected with a different group/device")
        try:
            segments = segment_trace(trace, marker)
        except KernelScopeError as exc:
            raise SegmentationFailure(f"trace {n}: {exc}") from exc
        ids = tuple(s.config_id for s in segments)
        if sequence is None:
            sequence = ids
        elif ids != sequence:
            raise InconsistentKernelSequence(f"trace {n} has kernel sequence {ids}, expected {sequence}")
        for seg in segments:
            pooled.setdefault(seg.config_id, []).append(channel_flatten(seg))

    refs = {}
    for cid, series_list in pooled.items():
        length = int(np.median([s.shape[1] for s in series_list]))
        stack = np.stack([resample(s, length) for s in series_list])
        med, mad = robust_reference(stack)
        refs[cid] = ReferenceSegment(cid, med, mad, len(series_list))
    return GoldenModel(group, device, refs, config_table, policy, sequence, marker)


def select_reference(model: GoldenModel, config_id: int) -> ReferenceSegment:
    try:
        return model.refs[int(config_id)]
    except KeyError:
        raise NoReferenceForConfig(f"no reference for config id {config_id}") from None
