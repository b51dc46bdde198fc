"""Domain types shared by every stage of the pipeline.

Counter data is held as numpy ``int64`` arrays laid out ``[window, event,
instance]``.  Every sample stores per-window deltas (counters reset at the end
of each sampling window), so a slice of a trace is itself a valid trace.
All objects are treated as immutable once built; array buffers are frozen.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidModel, UnknownConfiguration

MAX_GROUP_EVENTS = 8


class Category(str, enum.Enum):
    SM = "SM"
    MEMORY = "Memory"
    L2 = "L2"
    GLOBAL_MEMORY = "GlobalMemory"
    ATOMIC = "Atomic"
    TEXTURE = "Texture"
    PCIE = "PCIe"
    MISC = "Misc"


@dataclass(frozen=True)
class EventSpec:
    name: str
    category: Category
    instance_granularity: int

    def __post_init__(self):
        if not self.name or any(c in self.name for c in ",\n\r#"):
            raise InvalidModel(f"bad event name {self.name!r}")
        if self.instance_granularity < 1:
            raise InvalidModel("instance_granularity must be >= 1")
        object.__setattr__(self, "category", Category(self.category))


@dataclass(frozen=True)
class EventGroup:
    """Events that can be collected together.

    Only events reporting the same number of instances per sample can share a
    group, and the hardware exposes at most eight counters.
    """

    events: tuple

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        if not 1 <= len(events) <= MAX_GROUP_EVENTS:
            raise InvalidModel(f"event group needs 1..{MAX_GROUP_EVENTS} events, got {len(events)}")
        names = [e.name for e in events]
        if len(set(names)) != len(names):
            raise InvalidModel(f"duplicate event names in group: {names}")
        grains = {e.instance_granularity for e in events}
        if len(grains) != 1:
            raise InvalidModel(f"mixed instance granularity in group: {sorted(grains)}")

    @property
    def names(self) -> tuple:
        return tuple(e.name for e in self.events)

    @property
    def instances(self) -> int:
        return self.events[0].instance_granularity

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def __contains__(self, name) -> bool:
        if isinstance(name, EventSpec):
            name = name.name
        return name in self.names

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class DeviceConfig:
    num_sms: int
    sm_group_size: int
    window_cycles: int
    clock_mhz: float

    def __post_init__(self):
        if self.num_sms < 1 or self.sm_group_size < 1 or self.window_cycles < 1:
            raise InvalidModel("device sizes must be positive")
        if self.clock_mhz <= 0:
            raise InvalidModel("clock_mhz must be positive")
        if self.num_sms % self.sm_group_size:
            raise InvalidModel("num_sms must be divisible by sm_group_size")

    @property
    def num_sm_groups(self) -> int:
        return self.num_sms // self.sm_group_size


@dataclass(frozen=True)
class KernelMetadata:
    kernel_name: str
    grid_dims: tuple
    block_dims: tuple
    input_size: int
    config_id: int = -1

    def __post_init__(self):
        for dims in (self.grid_dims, self.block_dims):
            if len(dims) != 3 or any(int(d) < 1 for d in dims):
                raise InvalidModel(f"launch dims must be three positive ints, got {dims}")
        object.__setattr__(self, "grid_dims", tuple(int(d) for d in self.grid_dims))
        object.__setattr__(self, "block_dims", tuple(int(d) for d in self.block_dims))
        if self.input_size < 0:
            raise InvalidModel("input_size must be non-negative")

    @property
    def key(self) -> tuple:
        return (self.kernel_name, self.grid_dims, self.block_dims, int(self.input_size))


class ConfigTable:
    """Registry mapping a kernel launch configuration to its covert-channel id."""

    def __init__(self, entries: Optional[Mapping[tuple, int]] = None):
        self._by_key: dict = {}
        self._by_id: dict = {}
        for key, cid in (entries or {}).items():
            self._add(key, cid)

    def _add(self, key, cid):
        cid = int(cid)
        if cid < 0:
            raise InvalidModel("config ids are non-negative")
        if key in self._by_key and self._by_key[key] != cid:
            raise InvalidModel(f"configuration {key} already registered as {self._by_key[key]}")
        if cid in self._by_id and self._by_id[cid] != key:
            raise InvalidModel(f"config id {cid} already used by {self._by_id[cid]}")
        self._by_key[key] = cid
        self._by_id[cid] = key

    def register(self, meta: KernelMetadata, config_id: Optional[int] = None) -> KernelMetadata:
        """Register ``meta`` and return it with its ``config_id`` filled in."""
        if meta.key in self._by_key:
            cid = self._by_key[meta.key]
            if config_id is not None and config_id != cid:
                raise InvalidModel(f"configuration already registered as {cid}")
        else:
            cid = config_id if config_id is not None else (max(self._by_id, default=-1) + 1)
            self._add(meta.key, cid)
        return KernelMetadata(meta.kernel_name, meta.grid_dims, meta.block_dims, meta.input_size, cid)

    def lookup(self, config_id: int) -> KernelMetadata:
        key = self._by_id.get(int(config_id))
        if key is None:
            raise UnknownConfiguration(f"config id {config_id} not registered")
        name, grid, block, size = key
        return KernelMetadata(name, grid, block, size, int(config_id))

    def ids(self) -> list:
        return sorted(self._by_id)

    def items(self):
        """(key, id) pairs ordered by id."""
        return [(self._by_id[cid], cid) for cid in self.ids()]

    def __contains__(self, config_id) -> bool:
        return int(config_id) in self._by_id

    def __len__(self):
        return len(self._by_id)

    def __eq__(self, other):
        return isinstance(other, ConfigTable) and self._by_key == other._by_key

    def __repr__(self):
        return f"ConfigTable({len(self)} entries)"


def derive_config_id(meta: KernelMetadata, table: ConfigTable) -> int:
    try:
        return table._by_key[meta.key]
    except KeyError:
        raise UnknownConfiguration(f"configuration {meta.key} not registered") from None


def _frozen_counts(values, ndim) -> np.ndarray:
    arr = np.array(values, dtype=np.int64, copy=True)
    if arr.ndim != ndim:
        raise InvalidModel(f"expected a {ndim}-d count array, got shape {arr.shape}")
    if arr.size and arr.min() < 0:
        raise InvalidModel("counts must be non-negative")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Sample:
    window_index: int
    values: np.ndarray  # [event, instance]

    def __post_init__(self):
        if self.window_index < 0:
            raise InvalidModel("window_index must be non-negative")
        object.__setattr__(self, "values", _frozen_counts(self.values, 2))

    def __eq__(self, other):
        return (
            isinstance(other, Sample)
            and self.window_index == other.window_index
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class Trace:
    """Multichannel counter time series for one program run."""

    group: EventGroup
    device: DeviceConfig
    counts: np.ndarray  # [window, event, instance]
    windows: Optional[np.ndarray] = None
    meta: Optional[KernelMetadata] = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.size == 0:
            counts = counts.reshape(0, len(self.group), self.group.instances)
        counts = _frozen_counts(counts, 3)
        if counts.shape[1:] != (len(self.group), self.group.instances):
            raise InvalidModel(
                f"counts shape {counts.shape} does not match group "
                f"({len(self.group)} events x {self.group.instances} instances)"
            )
        windows = np.arange(counts.shape[0], dtype=np.int64) if self.windows is None else self.windows
        windows = _frozen_counts(windows, 1)
        if windows.shape[0] != counts.shape[0]:
            raise InvalidModel("one window index per sample required")
        if windows.size > 1 and np.any(np.diff(windows) <= 0):
            raise InvalidModel("window indices must be strictly increasing")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "windows", windows)

    @classmethod
    def from_samples(cls, group, device, samples: Iterable[Sample], meta=None) -> "Trace":
        samples = list(samples)
        if samples:
            counts = np.stack([s.values for s in samples])
        else:
            counts = np.zeros((0, len(group), group.instances), dtype=np.int64)
        return cls(group, device, counts, np.array([s.window_index for s in samples], dtype=np.int64), meta)

    @property
    def samples(self) -> tuple:
        return tuple(Sample(int(w), c) for w, c in zip(self.windows, self.counts))

    def __len__(self):
        return self.counts.shape[0]

    def channel(self, event: str) -> np.ndarray:
        """Per-window count of ``event`` summed across instances."""
        return self.counts[:, self.group.index(event), :].sum(axis=1)

    def __eq__(self, other):
        return (
            isinstance(other, Trace)
            and self.group == other.group
            and self.device == other.device
            and self.meta == other.meta
            and np.array_equal(self.windows, other.windows)
            and np.array_equal(self.counts, other.counts)
        )


@dataclass(frozen=True, eq=False)
class Segment:
    kernel_ordinal: int
    counts: np.ndarray  # [window, event, instance], marker windows excluded
    windows: np.ndarray
    meta: Optional[KernelMetadata] = None
    config_id: Optional[int] = None

    def __post_init__(self):
        counts = _frozen_counts(self.counts, 3)
        if counts.shape[0] == 0:
            raise InvalidModel("segments are non-empty")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "windows", _frozen_counts(self.windows, 1))

    def __len__(self):
        return self.counts.shape[0]


class Decision(str, enum.Enum):
    BENIGN = "Benign"
    COMPROMISED = "Compromised"
    INCOMPLETE = "Incomplete"


@dataclass(frozen=True)
class SegmentMatch:
    kernel_ordinal: int
    correlation: float
    matched: bool
    config_id: Optional[int] = None
    lag: int = 0


@dataclass(frozen=True)
class Verdict:
    per_segment: tuple
    max_consecutive_rejections: int
    decision: Decision
    flagged_kernel: Optional[int] = None
    diagnostics: tuple = field(default_factory=tuple)

    @property
    def min_coefficient(self) -> Optional[float]:
        if not self.per_segment:
            return None
        return min(m.correlation for m in self.per_segment)


def rejection_runs(matched: Sequence[bool]) -> list:
    """(start, length) of every maximal run of non-matches."""
    runs = []
    start = None
    for i, ok in enumerate(list(matched) + [True]):
        if not ok and start is None:
            start = i
        elif ok and start is not None:
            runs.append((start, i - start))
            start = None
    return runs


def decide(per_segment: Sequence[SegmentMatch], reject_run_len: int, diagnostics=(), structural_flag=None) -> Verdict:
    """Apply the consecutive-rejection policy to per-segment match results.

    ``structural_flag`` marks a structural problem (unpaired markers, missing
    kernels): the run is never Benign then.  Its value is the kernel ordinal to
    report, or ``-1`` when no ordinal can be identified.
    """
    per_segment = tuple(per_segment)
    runs = rejection_runs([m.matched for m in per_segment])
    max_run = max((n for _, n in runs), default=0)
    long_runs = [s for s, n in runs if n >= reject_run_len]
    if long_runs:
        decision = Decision.COMPROMISED
        flagged = per_segment[long_runs[0]].kernel_ordinal
    elif structural_flag is not None:
        decision = Decision.INCOMPLETE
        flagged = structural_flag if structural_flag >= 0 else None
    else:
        decision = Decision.BENIGN
        flagged = None
    return Verdict(per_segment, max_run, decision, flagged, tuple(diagnostics))
