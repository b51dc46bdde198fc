"""Counter-signature injectors for four GPU attacks.

Attacks act on the program (payload phases, skipped launches, stretched
timing) or add concurrent attacker kernels as noise.  Attacker kernels carry
no marker launches, so the marker channel is never touched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InvalidModel, InvalidTarget, MissingMemoryEvents
from .gpusim import KernelProfile, NoiseKind, NoiseSpec, Phase, ProgramSpec, expected_rates
from .model import Category, EventGroup

INST_EVENT = "inst_executed"
LOAD_EVENT = "global_load"
STORE_EVENT = "global_store"
DRAM_READ_EVENTS = ("fb_subp0_read_sectors", "fb_subp1_read_sectors")
L2_QUERY_EVENTS = ("l2_subp0_total_read_sector_queries", "l2_subp0_total_write_sector_queries")
MEMORY_CATEGORIES = (Category.MEMORY, Category.L2, Category.GLOBAL_MEMORY)


class AttackKind(str, enum.Enum):
    BUFFER_OVERFLOW = "BufferOverflow"
    MIND_CONTROL = "MindControl"
    ROWHAMMER = "Rowhammer"
    SLOWDOWN = "Slowdown"


# Calibrated against the bundled presets; see the README for the campaign
# numbers these produce.
DEFAULT_MAGNITUDE = {
    AttackKind.BUFFER_OVERFLOW: 0.5,
    AttackKind.MIND_CONTROL: 1.0,
    AttackKind.ROWHAMMER: 20.0,
    AttackKind.SLOWDOWN: 1.0,
}
DEFAULT_PAYLOAD_FRACTION = 0.75


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    target_kernel: Optional[int] = None
    magnitude: float = 1.0
    seed: int = 0
    payload_fraction: float = DEFAULT_PAYLOAD_FRACTION

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if not self.magnitude > 0:
            raise InvalidModel("attack magnitude must be > 0")
        if self.kind is AttackKind.MIND_CONTROL and self.target_kernel is None:
            raise InvalidModel("a mind-control attack needs a target kernel")
        if not 0 < self.payload_fraction <= 1:
            raise InvalidModel("payload_fraction must lie in (0, 1]")

    @classmethod
    def default(cls, kind, seed: int = 0, target_kernel: Optional[int] = None) -> "AttackSpec":
        kind = AttackKind(kind)
        if kind is AttackKind.MIND_CONTROL and target_kernel is None:
            target_kernel = 1  # the second kernel
        return cls(kind, target_kernel, DEFAULT_MAGNITUDE[kind], seed)


def _targets(program: ProgramSpec, target: Optional[int]) -> list:
    n = len(program.kernels)
    if target is None:
        return list(range(n))
    if not 0 <= target < n:
        raise InvalidTarget(f"kernel {target} does not exist in a {n}-kernel program")
    return [target]


def split_phases(profile: KernelProfile, at_window: int) -> tuple:
    """Phases covering body windows ``[0, at_window)`` and ``[at_window, end)``."""
    head, tail, t = [], [], 0
    for ph in profile.phases:
        lo, hi = t, t + ph.duration_windows
        if hi <= at_window:
            head.append(ph)
        elif lo >= at_window:
            tail.append(ph)
        else:
            head.append(replace(ph, duration_windows=at_window - lo))
            tail.append(replace(ph, duration_windows=hi - at_window))
        t = hi
    return tuple(head), tuple(tail)


def payload_phase(phase: Phase, magnitude: float) -> Phase:
    """Rewrite a phase as attacker payload.

    Instructions scale by ``1 + magnitude``; a share ``s = min(1, magnitude)``
    of the loads becomes stores and vice versa, so magnitude 1 swaps them.
    """
    rates = dict(phase.rates)
    s = min(1.0, magnitude)
    if INST_EVENT in rates:
        rates[INST_EVENT] *= 1.0 + magnitude
    if LOAD_EVENT in rates and STORE_EVENT in rates:
        ld, st = rates[LOAD_EVENT], rates[STORE_EVENT]
        rates[LOAD_EVENT] = (1 - s) * ld + s * st
        rates[STORE_EVENT] = s * ld + (1 - s) * st
    return replace(phase, rates=rates)


def inject_buffer_overflow(program: ProgramSpec, spec: AttackSpec) -> ProgramSpec:
    """Replace the trailing ``payload_fraction`` of each target body with payload phases."""
    kernels = list(program.kernels)
    for k in _targets(program, spec.target_kernel):
        prof, meta = kernels[k]
        start = prof.duration - max(1, int(round(spec.payload_fraction * prof.duration)))
        head, tail = split_phases(prof, start)
        tail = tuple(payload_phase(p, spec.magnitude) for p in tail)
        kernels[k] = (replace(prof, phases=head + tail), meta)
    return replace(program, kernels=tuple(kernels))


def inject_kernel_skip(program: ProgramSpec, spec: AttackSpec, allow_empty: bool = False) -> ProgramSpec:
    """Drop the target launch (body and both markers) from the program."""
    if spec.target_kernel is None:
        raise InvalidTarget("kernel skip needs a target kernel")
    _targets(program, spec.target_kernel)
    kernels = program.kernels[: spec.target_kernel] + program.kernels[spec.target_kernel + 1 :]
    if not kernels and not allow_empty:
        raise InvalidTarget("skipping the only kernel leaves an empty program")
    return replace(program, kernels=kernels)


def _memory_events(group: EventGroup) -> list:
    mem = [e.name for e in group.events if e.category in MEMORY_CATEGORIES]
    if not mem:
        raise MissingMemoryEvents("the event group has no memory-category events")
    return mem


def benign_mean_rates(program: ProgramSpec, events) -> dict:
    """Body-window mean of each event's per-instance rate over the whole program."""
    rows = np.concatenate([expected_rates(p, list(events)) for p, _ in program.kernels])
    return dict(zip(events, rows.mean(axis=0)))


def _bursty_phases(rng, total: int, high: dict, dispersion: float, mean_on: float = 3, mean_off: float = 3) -> list:
    phases, t, on = [], 0, bool(rng.integers(2))
    while t < total:
        d = int(min(total - t, 1 + rng.geometric(1 / (mean_on if on else mean_off))))
        phases.append(Phase(d, high if on else {}, dispersion))
        t, on = t + d, not on
    return phases


def inject_rowhammer(program: ProgramSpec, group: EventGroup, spec: AttackSpec) -> NoiseSpec:
    """A concurrent hammering kernel spanning the victim's whole execution.

    DRAM read sectors run at ``magnitude`` times the victim's mean rate and
    L2 queries at half that, in on/off bursts drawn from ``spec.seed``.
    """
    mem = _memory_events(group)
    mean = benign_mean_rates(program, mem)
    high = {}
    for e in mem:
        if e in DRAM_READ_EVENTS:
            high[e] = spec.magnitude * mean[e]
        elif e in L2_QUERY_EVENTS or e == LOAD_EVENT:
            high[e] = 0.5 * spec.magnitude * mean[e]
    rng = np.random.default_rng([spec.seed, 7])
    phases = _bursty_phases(rng, program.total_windows, high, 0.5)
    return NoiseSpec(((KernelProfile("rowhammer", tuple(phases), 1.0), 0),), NoiseKind.EXTERNAL)


def stretch_profile(profile: KernelProfile, factor: float) -> KernelProfile:
    phases = tuple(replace(p, duration_windows=max(1, int(round(p.duration_windows * factor)))) for p in profile.phases)
    return replace(profile, phases=phases)


def inject_slowdown(program: ProgramSpec, group: EventGroup, spec: AttackSpec) -> tuple:
    """Stretch target kernels by ``1 + magnitude`` and add a random-address DRAM attacker.

    The attacker reads DRAM at the victim's mean rate with heavy per-window
    dispersion (random addresses hit random sub-banks).
    """
    mem = _memory_events(group)
    kernels = list(program.kernels)
    for k in _targets(program, spec.target_kernel):
        prof, meta = kernels[k]
        kernels[k] = (stretch_profile(prof, 1.0 + spec.magnitude), meta)
    slowed = replace(program, kernels=tuple(kernels))
    mean = benign_mean_rates(program, mem)
    rates = {e: min(1.0, spec.magnitude) * mean[e] for e in mem}
    rng = np.random.default_rng([spec.seed, 11])
    phases = _bursty_phases(rng, slowed.total_windows, rates, 1.0, mean_on=2, mean_off=2)
    attacker = KernelProfile("rfm_slowdown", tuple(phases), 1.0)
    return slowed, NoiseSpec(((attacker, 0),), NoiseKind.EXTERNAL)


def apply_attack(program: ProgramSpec, group: EventGroup, spec: AttackSpec) -> tuple:
    """Dispatch on the attack kind; returns ``(program, noise or None)``."""
    if spec.kind is AttackKind.BUFFER_OVERFLOW:
        return inject_buffer_overflow(program, spec), None
    if spec.kind is AttackKind.MIND_CONTROL:
        return inject_kernel_skip(program, spec), None
    if spec.kind is AttackKind.ROWHAMMER:
        return program, inject_rowhammer(program, group, spec)
    return inject_slowdown(program, group, spec)
