"""Timing model of counter traffic sharing the on-chip interconnect.

SMs run in lockstep and every SM offers the same traffic, so one
representative SM with its equal share of a FIFO, token-bucket-limited
channel captures the contention: per cycle the link serves up to
``link_bandwidth`` flits from the SM's injection queue.  While the SM makes
progress it injects ``background_traffic`` flits per cycle (its own memory
traffic); it stalls whenever the queue cannot take them.  Each closed
sampling window adds one PMU entry to the SM's output buffer, which drains
into the queue as space permits; a full output buffer stalls the SM too.

With validation on, the validator also fetches one golden entry per window
over the same channel; that fetch, shared across SMs, is the only traffic
difference between the two modes.  With validation off the DMA engine moves
the PMU entries to memory at the same cost as sending them to the validator.

Flits are fluid (fractional) so the model is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .pmu import ENTRY_BYTES, OUT_BUFFER_ENTRIES


@dataclass(frozen=True)
class LinkTiming:
    cycles: int
    progress_cycles: int
    stall_cycles: int


def entry_flits(flit_bytes: int) -> int:
    return math.ceil(ENTRY_BYTES / flit_bytes)


def simulate_link(kernel_cycles: Sequence[int], window_cycles: int, num_sms: int, link_bandwidth: float,
                  link_latency: int, background_traffic: float, queue_flits: float, burst_flits: float,
                  launch_gap_cycles: int, flit_bytes: int, validation_on: bool) -> LinkTiming:
    """Total cycles to run kernels of the given lengths and drain their counter traffic."""
    golden_share = entry_flits(flit_bytes) / num_sms if validation_on else 0.0
    entry = entry_flits(flit_bytes) + golden_share
    progress_total = sum(int(c) for c in kernel_cycles)
    gaps = launch_gap_cycles * len(kernel_cycles)
    if math.isinf(link_bandwidth):
        return LinkTiming(progress_total + gaps + link_latency, progress_total, 0)
    if link_bandwidth <= 0:
        raise ValueError("link bandwidth must be > 0")
    if queue_flits < entry or queue_flits < background_traffic:
        raise ValueError("injection queue cannot hold a single entry")

    q = tokens = 0.0
    out_buf = 0  # PMU entries waiting to enter the injection queue
    t = stalls = 0

    for cycles in kernel_cycles:
        done = since_window = 0
        pending = False  # a frozen window waiting for output-buffer space
        gap = launch_gap_cycles
        while gap or done < cycles or pending:
            tokens = min(burst_flits, tokens + link_bandwidth)
            sent = min(q, tokens)
            q -= sent
            tokens -= sent
            while out_buf and q + entry <= queue_flits:
                q += entry
                out_buf -= 1
            t += 1
            if gap:
                gap -= 1
                continue
            if pending:
                if out_buf >= OUT_BUFFER_ENTRIES:
                    stalls += 1
                    continue
                out_buf += 1
                pending = False
                if done == cycles:
                    continue
            if q + background_traffic > queue_flits:
                stalls += 1
                continue
            q += background_traffic
            done += 1
            since_window += 1
            if since_window == window_cycles or done == cycles:
                since_window = 0
                if out_buf < OUT_BUFFER_ENTRIES:
                    out_buf += 1
                else:
                    pending = True
    while q > 1e-9 or out_buf:
        tokens = min(burst_flits, tokens + link_bandwidth)
        sent = min(q, tokens)
        q -= sent
        tokens -= sent
        while out_buf and q + entry <= queue_flits:
            q += entry
            out_buf -= 1
        t += 1
    return LinkTiming(t + link_latency, progress_total, stalls)
