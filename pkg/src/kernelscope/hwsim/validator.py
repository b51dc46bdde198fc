"""On-chip validator: timestamp-tagged aggregation cache and per-window checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import CacheCapacityExceeded, KernelScopeError
from .pmu import COUNTER_MAX, NUM_COUNTERS, PmuPacket

DEFAULT_CACHE_ENTRIES = 8
FETCH_BUFFER_ENTRIES = 4  # half the PMU output buffer
DEFAULT_TAU_SCALE = 6.0


class GoldenUnavailable(KernelScopeError):
    """The golden window for a check has not arrived in the fetch buffer yet."""


@dataclass
class AggCacheEntry:
    tag: tuple  # (kernel, ts)
    metrics_acc: list
    act: int  # packets still expected


@dataclass(frozen=True)
class WindowCheck:
    kernel: int
    ts: int
    metrics: tuple


@dataclass
class AggregationCache:
    capacity: int = DEFAULT_CACHE_ENTRIES
    entries: dict = field(default_factory=dict)

    def receive(self, packet: PmuPacket, active: int) -> Optional[WindowCheck]:
        """Accumulate one packet; return the window aggregate once ``act`` hits zero.

        Tags are namespaced by kernel so equal timestamps from consecutive
        kernels never alias.
        """
        tag = (packet.kernel, packet.ts)
        entry = self.entries.get(tag)
        if entry is None:
            if active < 1:
                raise ValueError("active PMU count must be >= 1")
            if len(self.entries) >= self.capacity:
                raise CacheCapacityExceeded(
                    f"no free aggregation entry for kernel {packet.kernel} window {packet.ts}"
                    f" ({len(self.entries)} incomplete entries)"
                )
            entry = self.entries[tag] = AggCacheEntry(tag, [0] * NUM_COUNTERS, active)
        entry.metrics_acc = [min(COUNTER_MAX, a + m) for a, m in zip(entry.metrics_acc, packet.metrics)]
        entry.act -= 1
        if entry.act == 0:
            del self.entries[tag]
            return WindowCheck(packet.kernel, packet.ts, tuple(entry.metrics_acc))
        return None

    def drop_kernel(self, kernel: int) -> int:
        """Discard every entry of a halted kernel; returns how many were dropped."""
        stale = [t for t in self.entries if t[0] == kernel]
        for t in stale:
            del self.entries[t]
        return len(stale)


def validator_receive(packet: PmuPacket, cache: AggregationCache, active: int) -> Optional[WindowCheck]:
    return cache.receive(packet, active)


def compare_window(metrics: Sequence[int], golden_window: Sequence[float], tau: Sequence[float]) -> frozenset:
    """Indices of metrics with ``|aggregate - golden| > tau`` (empty set means pass)."""
    diff = np.abs(np.asarray(metrics, dtype=np.float64) - np.asarray(golden_window, dtype=np.float64))
    return frozenset(int(i) for i in np.flatnonzero(diff > np.asarray(tau, dtype=np.float64)))


@dataclass(frozen=True, eq=False)
class HwKernelGolden:
    """Expected per-window aggregates of one kernel launch and its thresholds."""

    config_id: int
    windows: np.ndarray  # [window, metric] median aggregate
    spread: np.ndarray  # [window, metric] MAD
    thresholds: np.ndarray  # [metric]

    def __post_init__(self):
        for name in ("windows", "spread", "thresholds"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.any(self.thresholds < 0):
            raise ValueError("thresholds must be non-negative")

    def __eq__(self, other):
        return (
            isinstance(other, HwKernelGolden)
            and self.config_id == other.config_id
            and np.array_equal(self.windows, other.windows)
            and np.array_equal(self.spread, other.spread)
            and np.array_equal(self.thresholds, other.thresholds)
        )


@dataclass(frozen=True)
class HwValidatorConfig:
    tau_scale: float = DEFAULT_TAU_SCALE
    cache_entries: int = DEFAULT_CACHE_ENTRIES
    fetch_buffer_entries: int = FETCH_BUFFER_ENTRIES
    halt_on_flag: bool = True
    tau_override: Optional[tuple] = None  # one value per metric, replaces calibrated thresholds

    def __post_init__(self):
        if self.tau_scale < 0:
            raise ValueError("tau_scale must be non-negative")
        if self.tau_override is not None:
            object.__setattr__(self, "tau_override", tuple(float(t) for t in self.tau_override))
            if len(self.tau_override) != NUM_COUNTERS or min(self.tau_override) < 0:
                raise ValueError(f"tau_override needs {NUM_COUNTERS} non-negative values")
