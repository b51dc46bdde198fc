"""Cycle-level hardware validation run: event lines, PMUs, aggregation, timing.

A gpusim program is replayed on ``num_sms`` SMs.  Every kernel body window
becomes ``window_cycles`` cycles (plus a partial tail window at kernel end)
during which each of the eight event lines of every SM is asserted per cycle
with probability ``rate * scale``; the per-event scale maps the benign
program's peak rate to ``peak_line_rate``.  PMU window counts feed the
aggregation cache, whose per-window totals are compared with the golden
aggregates.  Cycle counts come from the interconnect timing model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..gpusim import ProgramSpec, expected_rates
from ..model import Decision
from ..similarity import dtw_similarity
from .interconnect import simulate_link
from .pmu import COUNTER_MAX, NUM_COUNTERS, PmuPacket, window_counts
from .validator import (
    AggregationCache,
    GoldenUnavailable,
    HwKernelGolden,
    HwValidatorConfig,
    compare_window,
)

LINE_EVENTS = (
    "inst_executed",
    "global_load",
    "global_store",
    "global_atom_cas",
    "fb_subp0_read_sectors",
    "fb_subp1_read_sectors",
    "l2_subp0_total_read_sector_queries",
    "l2_subp0_total_write_sector_queries",
)
MAD_FLOOR = 1.0  # counts; keeps DTW scaling finite on event lines that never fire


@dataclass(frozen=True)
class HwSimConfig:
    num_sms: int = 15
    window_cycles: int = 200
    tail_cycles: int = 50  # length of the partial last window of every kernel
    link_bandwidth: float = 0.5  # flits per cycle available to each SM's share of the channel
    link_latency: int = 20
    background_traffic: float = 0.25  # workload flits per progress cycle per SM
    queue_flits: float = 32.0
    burst_flits: float = 4.0
    launch_gap_cycles: int = 400
    flit_bytes: int = 32
    peak_line_rate: float = 0.5
    packet_order: str = "fifo"  # or "shuffle": seeded arrival order per window
    validator: HwValidatorConfig = field(default_factory=HwValidatorConfig)

    def __post_init__(self):
        if self.num_sms < 1 or self.window_cycles < 1 or self.tail_cycles < 0:
            raise ValueError("num_sms and window_cycles must be >= 1, tail_cycles >= 0")
        if not self.link_bandwidth > 0:
            raise ValueError("link bandwidth must be > 0")
        if not 0 < self.peak_line_rate <= 1:
            raise ValueError("peak_line_rate must lie in (0, 1]")
        if self.packet_order not in ("fifo", "shuffle"):
            raise ValueError("packet_order must be 'fifo' or 'shuffle'")

    def kernel_cycles(self, body_windows: int) -> int:
        return body_windows * self.window_cycles + self.tail_cycles


def line_scale(program: ProgramSpec, peak: float = 0.5, events: Sequence[str] = LINE_EVENTS) -> np.ndarray:
    """Per-event factor turning a per-window rate into a per-cycle assertion probability."""
    rates = np.concatenate([expected_rates(p, list(events)) for p, _ in program.kernels])
    top = rates.max(axis=0)
    return np.where(top > 0, peak / np.where(top > 0, top, 1.0), 0.0)


def kernel_lines(rng: np.random.Generator, profile, scale: np.ndarray, cfg: HwSimConfig,
                 events: Sequence[str] = LINE_EVENTS) -> np.ndarray:
    """0/1 event lines ``[cycle, sm, line]`` for one kernel launch.

    Each SM's per-window rate is perturbed with the phase dispersion before
    the per-cycle Bernoulli draw; the tail window reuses the last window's
    probabilities.
    """
    mean = expected_rates(profile, list(events)) * scale  # [window, line]
    disp = np.concatenate([np.full(p.duration_windows, p.dispersion) for p in profile.phases])
    shape = (mean.shape[0], cfg.num_sms, mean.shape[1])
    prob = np.broadcast_to(mean[:, None, :], shape).copy()
    noisy = (disp[:, None, None] > 0) & (prob > 0)
    if noisy.any():
        k = 1.0 / np.broadcast_to(disp[:, None, None], shape)[noisy] ** 2
        prob[noisy] = rng.gamma(k, prob[noisy] / k)
    prob = np.clip(prob, 0.0, 1.0)
    per_cycle = np.repeat(prob, cfg.window_cycles, axis=0)
    if cfg.tail_cycles:
        per_cycle = np.concatenate([per_cycle, np.repeat(prob[-1:], cfg.tail_cycles, axis=0)])
    return (rng.random(per_cycle.shape) < per_cycle).astype(np.uint8)


def kernel_counts(program: ProgramSpec, cfg: HwSimConfig, scale: np.ndarray) -> list:
    """PMU window counts ``[window, sm, counter]`` per kernel, plus conservation bookkeeping.

    Returns a list of ``(counts, line_totals, overflow)``.
    """
    out = []
    for k, (prof, _) in enumerate(program.kernels):
        rng = np.random.default_rng([program.seed, k, 3])
        lines = kernel_lines(rng, prof, scale, cfg)
        counts, overflow = window_counts(lines, cfg.window_cycles)
        out.append((counts, lines.sum(axis=0, dtype=np.uint64), overflow))
    return out


def aggregate(counts: np.ndarray) -> np.ndarray:
    """Brute-force window totals over SMs (saturating like the cache)."""
    return np.minimum(counts.sum(axis=1, dtype=np.uint64), COUNTER_MAX).astype(np.int64)


@dataclass(frozen=True, eq=False)
class HwGolden:
    kernels: tuple  # HwKernelGolden per expected launch
    sequence: tuple  # config id per expected launch
    scale: np.ndarray
    support: int

    def thresholds(self, k: int, vcfg: HwValidatorConfig) -> np.ndarray:
        if vcfg.tau_override is not None:
            return np.asarray(vcfg.tau_override, dtype=np.float64)
        return self.kernels[k].thresholds


def build_hw_golden(program: ProgramSpec, cfg: HwSimConfig, seeds: Sequence[int]) -> HwGolden:
    """Median per-window aggregates over benign runs.

    Each metric's threshold is ``tau_scale`` (6 by default) times the largest
    per-window MAD of that metric over the kernel.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one golden run")
    scale = line_scale(program, cfg.peak_line_rate)
    per_kernel = [[] for _ in program.kernels]
    for s in seeds:
        for k, (counts, _, _) in enumerate(kernel_counts(program.with_seed(s), cfg, scale)):
            per_kernel[k].append(aggregate(counts))
    kernels = []
    for (_, meta), stack in zip(program.kernels, per_kernel):
        stack = np.stack(stack).astype(np.float64)
        med = np.median(stack, axis=0)
        mad = np.median(np.abs(stack - med), axis=0)
        kernels.append(HwKernelGolden(meta.config_id, med, mad, cfg.validator.tau_scale * mad.max(axis=0)))
    return HwGolden(tuple(kernels), program.sequence, scale, len(seeds))


class FetchBuffer:
    """Golden windows prefetched from device memory, ``capacity`` entries ahead."""

    def __init__(self, windows: np.ndarray, capacity: int):
        self.windows = windows
        self.capacity = capacity
        self.next_fetch = 0
        self.entries = {}
        self.refill()

    def refill(self):
        while len(self.entries) < self.capacity and self.next_fetch < len(self.windows):
            self.entries[self.next_fetch] = self.windows[self.next_fetch]
            self.next_fetch += 1

    def take(self, ts: int) -> np.ndarray:
        if ts not in self.entries:
            raise GoldenUnavailable(f"golden window {ts} not in the fetch buffer")
        win = self.entries.pop(ts)
        self.refill()
        return win


@dataclass(frozen=True)
class HwRunResult:
    cycles: int
    decision: Decision
    flagged_kernel: Optional[int] = None
    flagged_ts: Optional[int] = None
    flagged_metrics: frozenset = frozenset()
    diagnostics: tuple = ()
    dtw: tuple = ()  # similarity per executed kernel (validation on only)
    windows: tuple = ()  # aggregated [window, metric] per executed kernel
    processed_packets: tuple = ()
    conservation_ok: bool = True
    overflow: bool = False
    stall_cycles: int = 0
    executed_cycles: tuple = ()  # body cycles each kernel actually ran (shorter when halted)


def _align(observed, expected):
    ordinals, j = [], 0
    for cid in observed:
        while j < len(expected) and expected[j] != cid:
            j += 1
        if j == len(expected):
            return None
        ordinals.append(j)
        j += 1
    return ordinals


def kernel_dtw(observed: np.ndarray, golden: HwKernelGolden) -> float:
    """DTW similarity of observed vs golden aggregates in golden noise units."""
    center = golden.windows.mean(axis=0)
    scale = np.maximum(golden.spread.max(axis=0), MAD_FLOOR)
    return dtw_similarity(np.asarray(observed, dtype=np.float64).T, golden.windows.T, center, scale).similarity


def program_cycles(program: ProgramSpec, cfg: HwSimConfig, validation_on: bool, body_cycles=None) -> int:
    body_cycles = body_cycles if body_cycles is not None else [cfg.kernel_cycles(p.duration) for p, _ in program.kernels]
    return simulate_link(body_cycles, cfg.window_cycles, cfg.num_sms, cfg.link_bandwidth, cfg.link_latency,
                         cfg.background_traffic, cfg.queue_flits, cfg.burst_flits, cfg.launch_gap_cycles,
                         cfg.flit_bytes, validation_on).cycles


def run_hwsim(program: ProgramSpec, cfg: HwSimConfig, validation_on: bool,
              golden: Optional[HwGolden] = None) -> HwRunResult:
    """Run a program through PMUs, interconnect and (optionally) the validator."""
    if validation_on and golden is None:
        raise ValueError("validation needs a preloaded golden model")
    scale = golden.scale if golden is not None else line_scale(program, cfg.peak_line_rate)
    counts = kernel_counts(program, cfg, scale)
    conservation = all(
        ovf or np.array_equal(c.sum(axis=0, dtype=np.uint64), totals) for c, totals, ovf in counts
    )
    overflow = any(ovf for _, _, ovf in counts)
    aggregates = [aggregate(c) for c, _, _ in counts]
    body_cycles = [cfg.kernel_cycles(p.duration) for p, _ in program.kernels]

    if not validation_on:
        return HwRunResult(program_cycles(program, cfg, False, body_cycles), Decision.BENIGN,
                           windows=tuple(aggregates), conservation_ok=conservation, overflow=overflow,
                           executed_cycles=tuple(body_cycles))

    vcfg = cfg.validator
    diagnostics = []
    flag = None  # (kernel ordinal, ts, metrics)
    observed = program.sequence
    ordinals = _align(observed, golden.sequence)
    if ordinals is None:
        diagnostics.append(f"dispatched kernel sequence {list(observed)} does not fit {list(golden.sequence)}")
        ordinals = list(range(len(observed)))
        structural = 0
    else:
        missing = [j for j in range(len(golden.sequence)) if j not in set(ordinals)]
        structural = missing[0] if missing else None
        diagnostics += [f"missing segment: kernel {j} (config {golden.sequence[j]})" for j in missing]

    cache = AggregationCache(vcfg.cache_entries)
    order_rng = np.random.default_rng([program.seed, 5])
    processed, dtw, executed_cycles = [], [], []
    for k, ((c, _, _), ordinal) in enumerate(zip(counts, ordinals)):
        if structural is not None and ordinal > structural and vcfg.halt_on_flag:
            break  # the dispatcher stops at the first kernel after a skipped one
        if ordinal >= len(golden.kernels):
            break
        gk = golden.kernels[ordinal]
        tau = golden.thresholds(ordinal, vcfg)
        fetch = FetchBuffer(gk.windows, vcfg.fetch_buffer_entries)
        n_packets = 0
        stop_ts = None
        for ts in range(c.shape[0]):
            sms = order_rng.permutation(cfg.num_sms) if cfg.packet_order == "shuffle" else range(cfg.num_sms)
            check = None
            for sm in sms:
                check = cache.receive(PmuPacket(int(sm), ts, c[ts, sm], ordinal), cfg.num_sms) or check
                n_packets += 1
            if ts >= len(gk.windows):
                bad = frozenset(range(NUM_COUNTERS))
                diagnostics.append(f"kernel {ordinal}: window {ts} beyond the golden length {len(gk.windows)}")
            else:
                bad = compare_window(check.metrics, fetch.take(ts), tau)
            if bad and flag is None:
                flag = (ordinal, ts, bad)
                if vcfg.halt_on_flag:
                    stop_ts = ts
                    break
        if stop_ts is None and c.shape[0] < len(gk.windows) and flag is None:
            flag = (ordinal, c.shape[0], frozenset(range(NUM_COUNTERS)))
            diagnostics.append(f"kernel {ordinal}: ended after {c.shape[0]} of {len(gk.windows)} windows")
        processed.append(n_packets)
        obs = aggregates[k] if stop_ts is None else aggregates[k][: stop_ts + 1]
        dtw.append(kernel_dtw(obs, gk))
        executed_cycles.append(body_cycles[k] if stop_ts is None else min(body_cycles[k], (stop_ts + 1) * cfg.window_cycles))
        if stop_ts is not None:
            cache.drop_kernel(ordinal)
            break

    cycles = program_cycles(program, cfg, True, executed_cycles)
    if flag is not None:
        decision = Decision.COMPROMISED
        fk, fts, fm = flag
    elif structural is not None:
        decision, fk, fts, fm = Decision.INCOMPLETE, structural, None, frozenset()
    else:
        decision, fk, fts, fm = Decision.BENIGN, None, None, frozenset()
    return HwRunResult(cycles, decision, fk, fts, fm, tuple(diagnostics), tuple(dtw),
                       tuple(aggregates[: len(processed)]), tuple(processed), conservation, overflow,
                       executed_cycles=tuple(executed_cycles))
