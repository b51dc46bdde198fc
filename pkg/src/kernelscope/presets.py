"""Bundled workload presets with invented, documented rate tables.

Every preset is named after a common GPU benchmark so campaigns have a
familiar shape, but none of the numbers are measured: each kernel is a short
sequence of short phases whose per-instance rates swing around a base level
by up to ``SWING`` (30%) in every channel, with levels drawn once from a fixed
generator key so the tables never change.  Loads and stores (and the L2 read/write
queries that follow them) swing in opposite directions so a load/store mix
change is visible to the correlation matcher.

Two event groups are provided, both carrying the atomic-CAS marker event:

* ``compute``: per-SM instruction and global-memory events (80 instances);
* ``memory``: frame-buffer and L2 sector events collected per SM group
  (16 instances on the default device).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gpusim import KernelProfile, Phase, ProgramSpec, register_program
from .model import Category, ConfigTable, DeviceConfig, EventGroup, EventSpec, KernelMetadata
from .segmentation import MarkerSpec

MARKER_EVENT = "global_atom_cas"
SWING = 0.3
DEFAULT_DISPERSION = 0.06

DEVICE = DeviceConfig(num_sms=80, sm_group_size=5, window_cycles=10_000, clock_mhz=1380.0)

COMPUTE_EVENTS = (
    ("inst_executed", Category.SM),
    ("global_load", Category.GLOBAL_MEMORY),
    ("global_store", Category.GLOBAL_MEMORY),
    (MARKER_EVENT, Category.ATOMIC),
)
MEMORY_EVENTS = (
    ("fb_subp0_read_sectors", Category.MEMORY),
    ("fb_subp1_read_sectors", Category.MEMORY),
    ("l2_subp0_total_read_sector_queries", Category.L2),
    ("l2_subp0_total_write_sector_queries", Category.L2),
    (MARKER_EVENT, Category.ATOMIC),
)
ALL_EVENTS = tuple(name for name, _ in COMPUTE_EVENTS[:3] + MEMORY_EVENTS)


def compute_group(device: DeviceConfig = DEVICE) -> EventGroup:
    return EventGroup(tuple(EventSpec(n, c, device.num_sms) for n, c in COMPUTE_EVENTS))


def memory_group(device: DeviceConfig = DEVICE) -> EventGroup:
    return EventGroup(tuple(EventSpec(n, c, device.num_sm_groups) for n, c in MEMORY_EVENTS))


def event_group(name: str, device: DeviceConfig = DEVICE) -> EventGroup:
    try:
        return {"compute": compute_group, "memory": memory_group}[name](device)
    except KeyError:
        raise ValueError(f"unknown event group {name!r}; choose 'compute' or 'memory'") from None


@dataclass(frozen=True)
class Base:
    """Base per-instance rates of one kernel (compute events per SM, memory events per SM group)."""

    inst: float
    load: float
    store: float
    fb: float
    l2: float

    def scaled(self, k: float) -> "Base":
        return Base(self.inst * k, self.load * k, self.store * k, self.fb * k, self.l2 * k)


def phase_rates(base: Base, u: float, v: float, w: float) -> dict:
    """Per-instance rates for latent levels ``u, v, w`` in [-1, 1].

    ``u`` drives instructions, ``v`` the load/store balance (loads and L2
    reads up, stores and L2 writes down), ``w`` the split between the two
    frame-buffer sub-partitions.
    """
    return {
        "inst_executed": base.inst * (1 + SWING * u),
        "global_load": base.load * (1 + SWING * v),
        "global_store": base.store * (1 - SWING * v),
        "fb_subp0_read_sectors": base.fb * (1 + SWING * w),
        "fb_subp1_read_sectors": base.fb * (1 - SWING * w) * (1 + 0.5 * SWING * v),
        "l2_subp0_total_read_sector_queries": base.l2 * (1 + SWING * v),
        "l2_subp0_total_write_sector_queries": 0.5 * base.l2 * (1 - SWING * v) * (1 + 0.5 * SWING * u),
    }


def _levels(rng, n: int) -> np.ndarray:
    """``n`` x 3 latent levels, each column a shuffle of ``n`` evenly spaced values in [-1, 1]."""
    grid = np.linspace(-1.0, 1.0, n)
    return np.stack([rng.permutation(grid) for _ in range(3)], axis=1)


def textured_kernel(name: str, base: Base, duration: int, key: int,
                    dispersion: float = DEFAULT_DISPERSION, occupancy: float = 1.0) -> KernelProfile:
    """Phases of 1 to 3 windows with independent latent levels.

    ``key`` seeds a private generator so the table is fixed per preset.
    """
    rng = np.random.default_rng(key)
    durs = []
    while sum(durs) < duration:
        durs.append(int(min(rng.integers(1, 4), duration - sum(durs))))
    levels = _levels(rng, len(durs))
    phases = tuple(Phase(d, phase_rates(base, *lv), dispersion) for d, lv in zip(durs, levels))
    return KernelProfile(name, phases, occupancy)


def alternating_kernel(name: str, base: Base, n_phases: int, phase_len: int, key: int,
                       dispersion: float = DEFAULT_DISPERSION, occupancy: float = 1.0) -> KernelProfile:
    """Short phases whose levels flip sign every phase (random magnitudes).

    The shape lives at a ``2 * phase_len`` period, which coarse sampling
    averages away.
    """
    rng = np.random.default_rng(key)
    levels = rng.uniform(0.5, 1.0, size=(n_phases, 3))
    levels[1::2] *= -1
    phases = tuple(Phase(phase_len, phase_rates(base, *lv), dispersion) for lv in levels)
    return KernelProfile(name, phases, occupancy)


def _meta(name, grid, block, size):
    return KernelMetadata(name, (grid, 1, 1), (block, 1, 1), size)


def _vecadd():
    k = textured_kernel("vecAdd", Base(12_000, 8_000, 4_000, 9_000, 12_000), 20, 101)
    return [(k, _meta("vecAdd", 196, 256, 50_000))] * 8


def _matmul():
    k = textured_kernel("matMul", Base(40_000, 2_500, 600, 2_500, 5_000), 24, 102)
    return [(k, _meta("matrixMul", 400, 1024, 640 * 640))] * 6


def _histogram():
    local = textured_kernel("histogram256", Base(18_000, 4_000, 800, 5_000, 7_000), 16, 103)
    merge = textured_kernel("mergeHistogram256", Base(6_000, 1_200, 1_000, 1_500, 2_500), 12, 104)
    pair = [(local, _meta("histogram256Kernel", 240, 192, 1 << 24)),
            (merge, _meta("mergeHistogram256Kernel", 256, 256, 256 * 240))]
    return pair * 4


def _bitonic():
    stages = []
    for s, bx in enumerate((256, 512, 1024)):
        k = alternating_kernel(f"bitonicMerge{s}", Base(9_000 + 2_000 * s, 2_500, 2_500, 3_500, 5_000), 8, 2, 110 + s)
        stages.append((k, _meta("bitonicMergeGlobal", bx, 512, 1 << 20)))
    return stages * 4


LAYER_BASE = {
    "conv": Base(30_000, 3_500, 1_200, 4_500, 7_000),
    "pool": Base(8_000, 3_000, 1_500, 3_000, 4_500),
    "fc": Base(16_000, 5_000, 600, 6_000, 8_000),
}


def _network(prefix: str, layers: Sequence[tuple], key: int) -> list:
    out = []
    for i, (kind, scale, duration) in enumerate(layers):
        name = f"{prefix}_{kind}{i}"
        k = textured_kernel(name, LAYER_BASE[kind].scaled(scale), duration, key + i)
        out.append((k, _meta(name, 128 * (i + 1), 256, 1024 * (i + 1))))
    return out


def _alexnet():
    return _network("alexnet", [
        ("conv", 1.0, 19), ("pool", 1.0, 10), ("conv", 1.4, 20), ("pool", 0.8, 10),
        ("conv", 1.2, 16), ("conv", 1.1, 16), ("fc", 1.0, 16), ("fc", 0.6, 12),
    ], 200)


def _cifarnet():
    return _network("cifarnet", [
        ("conv", 0.8, 14), ("pool", 0.9, 13), ("conv", 1.0, 18), ("pool", 0.7, 11),
        ("conv", 1.3, 15), ("pool", 0.6, 12), ("fc", 1.2, 15), ("fc", 0.5, 12),
    ], 300)


_BUILDERS = {
    "vecAdd": _vecadd,
    "matMul": _matmul,
    "histogram": _histogram,
    "bitonicSort": _bitonic,
    "alexnet": _alexnet,
    "cifarnet": _cifarnet,
}
PRESET_NAMES = tuple(_BUILDERS)
FAST_PRESET = "bitonicSort"


@dataclass(frozen=True)
class Workload:
    """A ready-to-simulate preset: program, its config table and the device."""

    name: str
    program: ProgramSpec
    table: ConfigTable
    device: DeviceConfig

    @property
    def marker(self) -> MarkerSpec:
        return self.program.marker


def preset(name: str, seed: int = 0, device: DeviceConfig = DEVICE, dispersion: float | None = None) -> Workload:
    """Instantiate a bundled preset.  ``dispersion`` overrides every phase's value."""
    try:
        kernels = _BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose one of {', '.join(PRESET_NAMES)}") from None
    if dispersion is not None:
        kernels = [(with_dispersion(p, dispersion), m) for p, m in kernels]
    table = ConfigTable()
    kernels, amps = register_program(kernels, table)
    marker = MarkerSpec(MARKER_EVENT, 1, amps, 0.1)
    return Workload(name, ProgramSpec(kernels, marker, seed), table, device)


def with_dispersion(profile: KernelProfile, dispersion: float) -> KernelProfile:
    phases = tuple(Phase(p.duration_windows, p.rates, dispersion) for p in profile.phases)
    return KernelProfile(profile.name, phases, profile.occupancy)
