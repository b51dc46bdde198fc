"""Marker-burst detection and per-kernel splitting.

Each validated kernel launch is bracketed by two launches of a tiny atomic-CAS
kernel.  Those show up as short bursts on the marker event; the window runs
between an opening and a closing burst form the kernel's segment.  The burst
amplitude (total CAS operations, fixed by the marker kernel's launch geometry)
carries the kernel's configuration id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    AmbiguousAmplitude,
    InvalidModel,
    MarkerEventAbsent,
    UnknownAmplitude,
    UnpairedMarker,
)
from .model import Segment, Trace


@dataclass(frozen=True)
class MarkerSpec:
    marker_event: str
    presence_threshold: int = 1
    expected_amplitude: Mapping[int, int] = field(default_factory=dict)
    amplitude_tolerance: float = 0.1

    def __post_init__(self):
        amps = {int(k): int(v) for k, v in dict(self.expected_amplitude).items()}
        object.__setattr__(self, "expected_amplitude", amps)
        if self.presence_threshold < 1:
            raise InvalidModel("presence threshold must be >= 1")
        if len(set(amps.values())) != len(amps):
            raise InvalidModel("marker amplitudes must be pairwise distinct")
        if any(a < self.presence_threshold for a in amps.values()):
            raise InvalidModel("marker amplitudes must reach the presence threshold")
        if not 0 <= self.amplitude_tolerance < 1:
            raise InvalidModel("amplitude tolerance must be in [0, 1)")


@dataclass(frozen=True)
class Burst:
    start_window: int  # positions in the trace, inclusive
    end_window: int
    total_count: int


def marker_channel(trace: Trace, spec: MarkerSpec) -> np.ndarray:
    if spec.marker_event not in trace.group:
        raise MarkerEventAbsent(f"marker event {spec.marker_event!r} not in event group")
    return trace.channel(spec.marker_event)


def detect_markers(trace: Trace, spec: MarkerSpec) -> list:
    """Maximal runs of windows whose summed marker count reaches the threshold."""
    chan = marker_channel(trace, spec)
    hot = chan >= spec.presence_threshold
    if not hot.any():
        return []
    edges = np.diff(np.concatenate(([0], hot.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return [Burst(int(s), int(e), int(chan[s : e + 1].sum())) for s, e in zip(starts, ends)]


def split_segments(trace: Trace, bursts) -> list:
    """Pair bursts as (open, close) and cut out the windows strictly between them.

    Kernels whose body is empty (an opening burst immediately followed by its
    closing one) are not representable as segments and raise as well.
    """
    bursts = list(bursts)
    if len(bursts) % 2:
        raise UnpairedMarker(f"{len(bursts)} marker bursts cannot be paired")
    segments = []
    for i in range(0, len(bursts), 2):
        lo, hi = bursts[i].end_window + 1, bursts[i + 1].start_window
        if hi <= lo:
            raise UnpairedMarker(f"kernel {i // 2} has no windows between its markers")
        segments.append(Segment(i // 2, trace.counts[lo:hi], trace.windows[lo:hi]))
    return segments


def decode_metadata(total_count: int, spec: MarkerSpec) -> int:
    """Map a burst's total CAS count to a configuration id."""
    if not spec.expected_amplitude:
        raise UnknownAmplitude("no marker amplitudes registered")
    eps = spec.amplitude_tolerance
    close = [
        (abs(total_count - amp) / amp, cid)
        for cid, amp in spec.expected_amplitude.items()
        if abs(total_count - amp) <= eps * amp
    ]
    if not close:
        raise UnknownAmplitude(f"burst total {total_count} matches no registered amplitude")
    if len(close) > 1:
        raise AmbiguousAmplitude(
            f"burst total {total_count} within tolerance of configs {sorted(c for _, c in close)}"
        )
    return close[0][1]


def segment_trace(trace: Trace, spec: MarkerSpec) -> list:
    """Detect, split and decode in one go; segments carry their config ids.

    The closing burst must decode to the same id as the opening one.
    """
    bursts = detect_markers(trace, spec)
    segments = split_segments(trace, bursts)
    out = []
    for seg, i in zip(segments, range(0, len(bursts), 2)):
        cid = decode_metadata(bursts[i].total_count, spec)
        closing = decode_metadata(bursts[i + 1].total_count, spec)
        if closing != cid:
            raise UnpairedMarker(
                f"kernel {seg.kernel_ordinal} opens with config {cid} but closes with {closing}"
            )
        out.append(Segment(seg.kernel_ordinal, seg.counts, seg.windows, config_id=cid))
    return out
