"""Per-SM performance monitoring unit with muxed 32-bit counters.

Each PMU watches eight one-bit event lines through eight 8-to-1 muxes.  A
counter increments on every cycle its selected line is asserted and
saturates at ``2**32 - 1`` (setting a sticky overflow flag).  When the
window cycle counter reaches ``window_cycles`` (or the kernel ends) the
counters are frozen into an output-buffer entry and reset.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

NUM_COUNTERS = 8
NUM_LINES = 8
COUNTER_MAX = 2**32 - 1
OUT_BUFFER_ENTRIES = 8
ENTRY_BYTES = 36  # 32-bit timestamp + eight 32-bit metrics
IDENTITY_MUX = tuple(range(NUM_COUNTERS))


@dataclass(frozen=True)
class PmuPacket:
    sm_id: int
    ts: int  # window ordinal within the kernel
    metrics: tuple  # NUM_COUNTERS 32-bit values
    kernel: int = 0

    def __post_init__(self):
        object.__setattr__(self, "metrics", tuple(int(m) for m in self.metrics))
        if len(self.metrics) != NUM_COUNTERS:
            raise ValueError(f"a packet carries exactly {NUM_COUNTERS} metrics")


@dataclass
class PmuState:
    window_cycles: int
    mux_select: tuple = IDENTITY_MUX
    sm_id: int = 0
    kernel: int = 0
    counters: list = field(default_factory=lambda: [0] * NUM_COUNTERS)
    cycle_count: int = 0  # cycles into the current window
    ts: int = 0
    overflow: bool = False
    out_buffer: deque = field(default_factory=deque)
    pending: Optional[PmuPacket] = None  # frozen entry waiting for buffer space
    stall_cycles: int = 0

    def __post_init__(self):
        self.mux_select = tuple(int(m) for m in self.mux_select)
        if len(self.mux_select) != NUM_COUNTERS or not all(0 <= m < NUM_LINES for m in self.mux_select):
            raise ValueError(f"mux_select needs {NUM_COUNTERS} selectors in [0, {NUM_LINES})")
        if not 0 < self.window_cycles <= COUNTER_MAX:
            raise ValueError("window_cycles must fit the 32-bit cycle counter and be positive")

    @property
    def stalled(self) -> bool:
        return self.pending is not None


def _freeze(state: PmuState) -> PmuPacket:
    pkt = PmuPacket(state.sm_id, state.ts, tuple(state.counters), state.kernel)
    state.counters = [0] * NUM_COUNTERS
    state.cycle_count = 0
    state.ts += 1
    return pkt


def _push(state: PmuState, pkt: PmuPacket) -> bool:
    if len(state.out_buffer) >= OUT_BUFFER_ENTRIES:
        state.pending = pkt
        return False
    state.out_buffer.append(pkt)
    state.pending = None
    return True


def pmu_step(state: PmuState, event_lines: Sequence[int]) -> Optional[PmuPacket]:
    """Advance one cycle.  Returns the packet emitted at a window boundary.

    While a frozen entry waits for output-buffer space the PMU (and its SM)
    is stalled: the cycle is recorded as a stall and the lines are ignored.
    """
    if state.pending is not None:
        pkt = state.pending
        if not _push(state, pkt):
            state.stall_cycles += 1
            return None
        return pkt
    for i, sel in enumerate(state.mux_select):
        if event_lines[sel]:
            if state.counters[i] == COUNTER_MAX:
                state.overflow = True
            else:
                state.counters[i] += 1
    state.cycle_count += 1
    if state.cycle_count == state.window_cycles:
        pkt = _freeze(state)
        return pkt if _push(state, pkt) else None
    return None


def pmu_finish(state: PmuState) -> Optional[PmuPacket]:
    """Kernel end: emit the partial window (if any) and rearm for the next kernel."""
    pkt = None
    if state.cycle_count:
        pkt = _freeze(state)
        _push(state, pkt)
    state.ts = 0
    return pkt


def drain(state: PmuState, n: int = OUT_BUFFER_ENTRIES) -> list:
    """Hand up to ``n`` buffered entries to the interconnect (or DMA engine)."""
    out = []
    while state.out_buffer and len(out) < n:
        out.append(state.out_buffer.popleft())
    if state.pending is not None:
        _push(state, state.pending)
    return out


def window_counts(lines: np.ndarray, window_cycles: int, mux_select: Sequence[int] = IDENTITY_MUX) -> tuple:
    """Vectorized PMU over a whole kernel.

    ``lines`` is ``[cycle, ..., line]`` of 0/1; returns ``(counts, overflow)``
    with counts ``[window, ..., counter]`` (last window partial if the kernel
    length is not a multiple of ``window_cycles``).  Equivalent to stepping
    :func:`pmu_step` on every cycle and calling :func:`pmu_finish`, provided
    the output buffer is drained in time.
    """
    lines = np.asarray(lines)
    n = lines.shape[0]
    selected = lines[..., list(mux_select)]
    if n == 0:
        return np.zeros((0,) + selected.shape[1:], dtype=np.uint64), False
    starts = np.arange(0, n, window_cycles)
    raw = np.add.reduceat(selected.astype(np.uint64), starts, axis=0)
    overflow = bool((raw > COUNTER_MAX).any())
    return np.minimum(raw, COUNTER_MAX), overflow
