"""Cycle-level model of an on-chip validator fed by per-SM PMUs."""

from .interconnect import LinkTiming, entry_flits, simulate_link
from .pmu import (COUNTER_MAX, ENTRY_BYTES, IDENTITY_MUX, NUM_COUNTERS, NUM_LINES, OUT_BUFFER_ENTRIES, PmuPacket,
                  PmuState, drain, pmu_finish, pmu_step, window_counts)
from .sim import (LINE_EVENTS, HwGolden, HwRunResult, HwSimConfig, build_hw_golden, kernel_dtw, program_cycles,
                  run_hwsim)
from .validator import (AggCacheEntry, AggregationCache, GoldenUnavailable, HwKernelGolden, HwValidatorConfig,
                        WindowCheck, compare_window, validator_receive)

__all__ = [
    "AggCacheEntry", "AggregationCache", "COUNTER_MAX", "ENTRY_BYTES", "GoldenUnavailable", "HwGolden",
    "HwKernelGolden", "HwRunResult", "HwSimConfig", "HwValidatorConfig", "IDENTITY_MUX", "LINE_EVENTS",
    "LinkTiming", "NUM_COUNTERS", "NUM_LINES", "OUT_BUFFER_ENTRIES", "PmuPacket", "PmuState", "WindowCheck",
    "build_hw_golden", "compare_window", "drain", "entry_flits", "kernel_dtw", "pmu_finish", "pmu_step",
    "program_cycles", "run_hwsim", "simulate_link", "validator_receive", "window_counts",
]
