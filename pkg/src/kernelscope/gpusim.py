"""Window-granular synthetic GPU counter simulator.

A program is a sequence of kernel launches.  Each launch is emitted as::

    [opening marker window] [body windows ...] [closing marker window]

with ``gap_windows`` idle windows between consecutive launches (host launch
latency) plus a seeded jitter of up to ``launch_jitter`` windows before each
launch, so kernel starts wander relative to the sampling grid.  Body counts are drawn per window, per active instance and per event
from an over-dispersed law with the phase's mean; a dispersion of zero makes
the draw exact.  Concurrent noise kernels add their own counts on top, on the
instances they occupy, and never touch the marker event.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidModel, UnregisteredConfig
from .model import DeviceConfig, EventGroup, KernelMetadata, Trace
from .segmentation import MarkerSpec

DEFAULT_GAP_WINDOWS = 16
DEFAULT_LAUNCH_JITTER = 3


@dataclass(frozen=True)
class Phase:
    duration_windows: int
    rates: Mapping[str, float]  # mean count per instance per window
    dispersion: float = 0.0  # coefficient of variation of the per-window draw

    def __post_init__(self):
        object.__setattr__(self, "rates", {k: float(v) for k, v in dict(self.rates).items()})
        if self.duration_windows < 1:
            raise InvalidModel("phase duration must be >= 1 window")
        if any(v < 0 for v in self.rates.values()) or self.dispersion < 0:
            raise InvalidModel("rates and dispersion must be non-negative")


@dataclass(frozen=True)
class KernelProfile:
    name: str
    phases: tuple
    occupancy: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise InvalidModel("a kernel needs at least one phase")
        if not 0 < self.occupancy <= 1:
            raise InvalidModel("occupancy must lie in (0, 1]")

    @property
    def duration(self) -> int:
        return sum(p.duration_windows for p in self.phases)

    def events(self) -> set:
        return set().union(*(p.rates for p in self.phases))


@dataclass(frozen=True)
class ProgramSpec:
    kernels: tuple  # of (KernelProfile, KernelMetadata)
    marker: MarkerSpec
    seed: int = 0
    gap_windows: int = DEFAULT_GAP_WINDOWS
    launch_jitter: int = DEFAULT_LAUNCH_JITTER  # extra idle windows before each launch, 0..jitter

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple((p, m) for p, m in self.kernels))
        if self.gap_windows < 0 or self.launch_jitter < 0:
            raise InvalidModel("gap_windows and launch_jitter must be non-negative")

    def with_seed(self, seed: int) -> "ProgramSpec":
        return replace(self, seed=int(seed))

    @property
    def sequence(self) -> tuple:
        return tuple(m.config_id for _, m in self.kernels)

    def layout(self) -> list:
        """(opening window, first body window, closing window) per kernel.

        Launch jitter comes from its own stream of the seed, so it never
        disturbs the count draws.
        """
        jitter = np.random.default_rng([self.seed, 2]).integers(0, self.launch_jitter + 1, len(self.kernels))
        out, t = [], 0
        for i, (prof, _) in enumerate(self.kernels):
            t += int(jitter[i]) + (self.gap_windows if i else 0)
            out.append((t, t + 1, t + 1 + prof.duration))
            t += prof.duration + 2
        return out

    @property
    def total_windows(self) -> int:
        lay = self.layout()
        return lay[-1][2] + 1 if lay else 0


class NoiseKind(str, enum.Enum):
    SELF = "SelfNoise"
    EXTERNAL = "ExternalNoise"


@dataclass(frozen=True)
class NoiseSpec:
    concurrent: tuple = ()  # of (KernelProfile, start_window)
    kind: NoiseKind = NoiseKind.EXTERNAL

    def __post_init__(self):
        object.__setattr__(self, "concurrent", tuple((p, int(s)) for p, s in self.concurrent))
        if any(s < 0 for _, s in self.concurrent):
            raise InvalidModel("noise start windows must be non-negative")

    def __add__(self, other: "NoiseSpec") -> "NoiseSpec":
        return NoiseSpec(self.concurrent + other.concurrent, self.kind)


def expected_rates(profile: KernelProfile, events: Sequence[str]) -> np.ndarray:
    """Mean per-instance count of each event for every body window, ``[window, event]``."""
    rows = []
    for ph in profile.phases:
        rows.extend([[ph.rates.get(e, 0.0) for e in events]] * ph.duration_windows)
    return np.array(rows, dtype=np.float64)


def _dispersions(profile: KernelProfile) -> np.ndarray:
    return np.concatenate([np.full(p.duration_windows, p.dispersion) for p in profile.phases])


def draw_counts(rng: np.random.Generator, mean: np.ndarray, dispersion: np.ndarray) -> np.ndarray:
    """Over-dispersed non-negative integer counts with the given means.

    Gamma with coefficient of variation ``dispersion`` followed by unbiased
    stochastic rounding.  ``dispersion == 0`` is a noiseless counter: the mean
    is rounded half up.
    """
    mean = np.asarray(mean, dtype=np.float64)
    disp = np.broadcast_to(np.asarray(dispersion, dtype=np.float64), mean.shape)
    noisy = (disp > 0) & (mean > 0)
    lam = mean.copy()
    if noisy.any():
        k = 1.0 / disp[noisy] ** 2
        lam[noisy] = rng.gamma(k, mean[noisy] / k)
    base = np.floor(lam)
    frac = lam - base
    # Draw the rounding noise for every element so the stream layout is shape-only.
    bump = rng.random(lam.shape) < frac
    bump = np.where(disp > 0, bump, frac >= 0.5)
    return (base + bump).astype(np.int64)


def active_instances(occupancy: float, instances: int) -> int:
    return min(instances, max(1, int(round(occupancy * instances))))


def _profile_block(rng, profile: KernelProfile, names, n_instances: int, sms_per_instance: float = 1.0) -> np.ndarray:
    """Body counts ``[window, event, instance]`` on the first active instances.

    Dispersion is per SM; an instance that aggregates several SMs sums their
    independent fluctuations, so its coefficient of variation shrinks by the
    square root of that count.
    """
    n = active_instances(profile.occupancy, n_instances)
    mean = expected_rates(profile, names)
    disp = _dispersions(profile)[:, None, None] / np.sqrt(max(1.0, sms_per_instance))
    block = np.zeros((profile.duration, len(names), n_instances), dtype=np.int64)
    block[:, :, :n] = draw_counts(rng, np.repeat(mean[:, :, None], n, axis=2), disp)
    return block


def _check_rates(profile: KernelProfile, group: EventGroup, marker_event: str):
    missing = [e for e in group.names if e != marker_event and any(e not in p.rates for p in profile.phases)]
    if missing:
        raise InvalidModel(f"kernel {profile.name!r} defines no rate for {missing}")


def split_amplitude(total: int, n: int) -> np.ndarray:
    """Spread ``total`` over ``n`` instances, remainder to the lowest ids."""
    out = np.full(n, total // n, dtype=np.int64)
    out[: total % n] += 1
    return out


def simulate(program: ProgramSpec, device: DeviceConfig, group: EventGroup,
             noise: Optional[NoiseSpec] = None) -> Trace:
    names = group.names
    marker = program.marker
    n_inst = group.instances
    if marker.marker_event not in group:
        raise InvalidModel(f"marker event {marker.marker_event!r} not in the event group")
    m_idx = group.index(marker.marker_event)
    per_inst = device.num_sms / n_inst
    counts = np.zeros((program.total_windows, len(names), n_inst), dtype=np.int64)
    rng = np.random.default_rng([program.seed, 0])

    for (prof, meta), (open_w, body_w, close_w) in zip(program.kernels, program.layout()):
        _check_rates(prof, group, marker.marker_event)
        amp = marker.expected_amplitude.get(meta.config_id)
        if amp is None:
            raise UnregisteredConfig(f"config id {meta.config_id} of {meta.kernel_name!r} has no marker amplitude")
        n_active = active_instances(prof.occupancy, n_inst)
        burst = split_amplitude(amp, n_active)
        counts[open_w, m_idx, :n_active] = burst
        counts[close_w, m_idx, :n_active] = burst
        counts[body_w:close_w] = _profile_block(rng, prof, names, n_inst, per_inst)

    if noise is not None:
        nrng = np.random.default_rng([program.seed, 1])
        for prof, start in noise.concurrent:
            if start >= counts.shape[0]:
                continue
            block = _profile_block(nrng, prof, names, n_inst, per_inst)
            n = active_instances(prof.occupancy, n_inst)
            # Noise kernels occupy the highest-numbered instances.
            block = np.roll(block, n_inst - n, axis=2)
            block[:, m_idx, :] = 0
            stop = min(counts.shape[0], start + block.shape[0])
            counts[start:stop] += block[: stop - start]
    return Trace(group, device, counts)


def sampling_decimate(trace: Trace, keep_every: int) -> Trace:
    """Merge every ``keep_every`` consecutive windows by summation.

    A trailing partial group becomes its own (shorter) window.
    """
    if keep_every < 1:
        raise ValueError("keep_every must be >= 1")
    if keep_every == 1:
        return trace
    t = len(trace)
    starts = np.arange(0, t, keep_every)
    merged = np.add.reduceat(trace.counts, starts, axis=0) if t else trace.counts
    return Trace(trace.group, trace.device, merged, None, trace.meta)


def program_as_profile(program: ProgramSpec, name: Optional[str] = None, occupancy: Optional[float] = None) -> KernelProfile:
    """The whole program (at its seed's launch layout) as one marker-free noise profile.

    Gaps and marker windows become idle phases.
    """
    phases, t = [], 0
    for (prof, _), (open_w, body_w, close_w) in zip(program.kernels, program.layout()):
        phases.append(Phase(body_w - t, {}, 0.0))
        phases.extend(prof.phases)
        t = close_w
    phases.append(Phase(1, {}, 0.0))
    occ = occupancy if occupancy is not None else min(p.occupancy for p, _ in program.kernels)
    return KernelProfile(name or "program", tuple(phases), occ)


def marker_amplitude(k: int, threads: int = 4, base_blocks: int = 40, ratio: float = 1.25) -> int:
    """CAS total of the k-th marker geometry: ``threads`` x ``base_blocks * ratio**k`` blocks.

    Consecutive amplitudes differ by 25%, so their +-10% decode windows never
    overlap.
    """
    return threads * int(round(base_blocks * ratio**k))


def register_program(kernels: Sequence[tuple], table) -> tuple:
    """Register each (profile, metadata) launch and assign marker amplitudes.

    Returns ``(kernels with config ids filled in, {config_id: amplitude})``.
    """
    out, amps = [], {}
    for prof, meta in kernels:
        meta = table.register(meta)
        out.append((prof, meta))
        amps.setdefault(meta.config_id, None)
    for k, cid in enumerate(sorted(amps)):
        amps[cid] = marker_amplitude(k)
    return tuple(out), amps
