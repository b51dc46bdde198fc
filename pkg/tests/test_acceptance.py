"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected in ``RESULTS`` and echoed in the terminal summary
(see ``conftest.py``), so ``pytest tests/test_acceptance.py`` ends with a
nine-line scorecard.
"""

import contextlib
import io
import math
import os
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from kernelscope.attacks import AttackKind, AttackSpec, apply_attack, inject_buffer_overflow, inject_kernel_skip
from kernelscope.campaign import (
    AttackTemplate, CampaignConfig, decimation_sweep, hwsim_study, noise_study, run_software_campaign,
)
from kernelscope.cli import main
from kernelscope.golden import build_golden
from kernelscope.gpusim import expected_rates, simulate
from kernelscope.hwsim import (
    LINE_EVENTS, AggregationCache, HwSimConfig, HwValidatorConfig, PmuPacket, build_hw_golden, run_hwsim,
)
from kernelscope.model import Decision, SegmentMatch, decide
from kernelscope.presets import DEVICE, FAST_PRESET, PRESET_NAMES, compute_group, memory_group, preset
from kernelscope.similarity import dtw_path_cost, match_segment, xcorr
from kernelscope.errors import DegenerateInput
from kernelscope.traceio import dumps_golden, dumps_trace, loads_golden, loads_trace
from kernelscope.validator import validate_trace
from oracles import brute_sum, dtw_enumerate, dtw_recursive, xcorr_oracle
from strategies import golden_models, traces

RESULTS = {}


@contextlib.contextmanager
def criterion(number, title):
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        RESULTS[number] = f"FAIL  criterion {number}: {title} ({type(exc).__name__}: {str(exc)[:160]})"
        print(RESULTS[number])
        raise
    extra = f" [{detail['info']}]" if "info" in detail else ""
    RESULTS[number] = f"PASS  criterion {number}: {title}{extra}"
    print(RESULTS[number])


def test_1_similarity_oracles():
    with criterion(1, "xcorr and DTW equal brute-force oracles on 10,000+ random inputs") as d:
        t0 = time.time()
        rng = np.random.default_rng(2024)
        cases = 0
        for _ in range(10_000):
            ch = int(rng.integers(1, 4))
            a = rng.integers(-9, 10, (ch, int(rng.integers(1, 9)))).astype(float)
            b = rng.integers(-9, 10, (ch, int(rng.integers(1, 9)))).astype(float)
            if rng.random() < 0.5:
                a, b = a + rng.random(a.shape), b * rng.random(b.shape)
            try:
                res = xcorr(a, b)
            except DegenerateInput:
                assert all(len(set(a[c])) == 1 or len(set(b[c])) == 1 for c in range(ch))
            else:
                table = xcorr_oracle(a.tolist(), b.tolist())
                assert abs(res.coefficient - max(table.values())) <= 1e-9
                assert abs(table[res.best_lag] - res.coefficient) <= 1e-9
            n, m = a.shape[1], b.shape[1]
            cost = rng.random((n, m)) * 10
            dist, path_len = dtw_path_cost(cost)
            assert dist == dtw_recursive(tuple(map(tuple, cost.tolist())))
            if n <= 5 and m <= 5:
                best, lengths = dtw_enumerate(cost.tolist())
                assert dist == best and path_len in lengths
            cases += 1
        elapsed = time.time() - t0
        assert cases >= 10_000 and elapsed < 60
        d["info"] = f"{cases} cases, {elapsed:.1f}s"


def test_2_identity_soundness():
    with criterion(2, "every golden trace validates Benign against its own model, 6 presets x 100 seeds") as d:
        t0 = time.time()
        worst = 1.0
        for name in PRESET_NAMES:
            wl = preset(name)
            for group in (compute_group(), memory_group()):
                gold = [simulate(wl.program.with_seed(s), DEVICE, group) for s in range(100)]
                model = build_golden(gold, wl.marker, wl.table)
                for t in gold:
                    v = validate_trace(t, model)
                    assert v.decision is Decision.BENIGN, (name, v.diagnostics)
                    assert v.max_consecutive_rejections == 0
                    assert min(m.correlation for m in v.per_segment) >= 0.99
                    worst = min(worst, v.min_coefficient)
        elapsed = time.time() - t0
        assert elapsed < 300
        d["info"] = f"min coefficient {worst:.4f}, {elapsed:.1f}s"


def _run(pattern):
    return decide([SegmentMatch(i, 0.9 if c == "1" else 0.1, c == "1") for i, c in enumerate(pattern)], 4)


def test_3_policy_boundary():
    with criterion(3, "3 consecutive mismatches Benign, 4 Compromised, coefficient exactly 0.8 is a non-match"):
        assert _run("10001").decision is Decision.BENIGN
        assert _run("100001").decision is Decision.COMPROMISED
        assert _run("000").decision is Decision.BENIGN
        assert _run("0000").decision is Decision.COMPROMISED

        # end to end: payload in 3 vs 4 consecutive kernels
        wl = preset("alexnet")
        g = compute_group()
        model = build_golden([simulate(wl.program.with_seed(s), DEVICE, g) for s in range(30)], wl.marker, wl.table)
        for targets, expected in (((2, 3, 4), Decision.BENIGN), ((2, 3, 4, 5), Decision.COMPROMISED)):
            p = wl.program.with_seed(99)
            for k in targets:
                p = inject_buffer_overflow(p, AttackSpec(AttackKind.BUFFER_OVERFLOW, k, 0.5))
            v = validate_trace(simulate(p, DEVICE, g), model)
            assert v.max_consecutive_rejections == len(targets)
            assert v.decision is expected

        # a pair whose best-lag Pearson coefficient is exactly 4/5
        a, b = [3, 4, 5, 2, 0, 4], [2, 5, 0, 2, 3, 1]
        res = xcorr([a], [b])
        xs, ys = a[0:4], b[2:6]
        assert res.best_lag == 2
        mx, my = Fraction(sum(xs), 4), Fraction(sum(ys), 4)
        sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
        sxx, syy = sum((x - mx) ** 2 for x in xs), sum((y - my) ** 2 for y in ys)
        assert sxy > 0 and sxy * sxy / (sxx * syy) == Fraction(16, 25)
        assert res.coefficient == 0.8
        assert not match_segment(np.array([a], dtype=float), np.array([b], dtype=float), 0.8).matched


def test_4_mind_control_detection():
    with criterion(4, "kernel skip on the 8-kernel presets detected in 100/100 trials each") as d:
        for name in ("alexnet", "cifarnet"):
            wl = preset(name)
            g = compute_group()
            model = build_golden([simulate(wl.program.with_seed(s), DEVICE, g) for s in range(30)],
                                 wl.marker, wl.table)
            hits = 0
            for s in range(100):
                target = s % 8
                p = inject_kernel_skip(wl.program.with_seed(5000 + s),
                                       AttackSpec(AttackKind.MIND_CONTROL, target, 1.0, 5000 + s))
                v = validate_trace(simulate(p, DEVICE, g), model)
                ok = (v.decision is not Decision.BENIGN and v.flagged_kernel == target
                      and any(m.startswith(f"missing segment: kernel {target} ") for m in v.diagnostics))
                hits += ok
            assert hits == 100, (name, hits)
        d["info"] = "alexnet 100/100, cifarnet 100/100"


def test_5_calibrated_campaigns():
    with criterion(5, "default campaigns meet TPR/FPR targets; decimation raises FPR on the fast preset") as d:
        t0 = time.time()
        sizes = {"golden": 100, "normal": 100, "attack": 100}
        attacks = tuple(AttackTemplate(k) for k in ("BufferOverflow", "Rowhammer", "Slowdown"))
        summary = []
        for name in PRESET_NAMES:
            res = run_software_campaign(CampaignConfig(presets=(name,), sizes=sizes, attacks=attacks))
            for ds in res.datasets:
                r = ds.report
                kind = ds.attack.kind
                assert len(ds.normal) == 100 and len(ds.attack_verdicts) == 100
                if kind is AttackKind.BUFFER_OVERFLOW:
                    assert r.tpr >= 0.95 and r.fpr <= 0.10, (name, kind, r.tpr, r.fpr)
                else:
                    assert r.tpr == 1.0 and r.fpr <= 0.05, (name, kind, r.tpr, r.fpr)
                summary.append(r.tpr)
        fpr = decimation_sweep(FAST_PRESET, range(1, 9))
        for k in range(4, 9):
            assert fpr[k] > fpr[1], fpr
        elapsed = time.time() - t0
        assert elapsed < 600
        d["info"] = f"min TPR {min(summary):.2f}, decimation FPR {[round(fpr[k], 2) for k in range(1, 9)]}, " \
                    f"{elapsed:.0f}s"


def test_6_noise_ordering():
    with criterion(6, "baseline >= self-noise >= external-noise, non-increasing in concurrency") as d:
        rows = noise_study(CampaignConfig.from_dict({"noise": {"traces": 20, "levels": [0, 1, 2, 3]}}))
        cell = {(r["noise"], r["concurrency"]): r["mean_dtw"] for r in rows}
        assert all(r["traces"] >= 20 for r in rows)
        base = cell[("baseline", 0)]
        for kind in ("self", "external"):
            series = [base] + [cell[(kind, n)] for n in (1, 2, 3)]
            assert all(x >= y for x, y in zip(series, series[1:])), (kind, series)
        for n in (1, 2, 3):
            assert base >= cell[("self", n)] >= cell[("external", n)]
        d["info"] = ", ".join(f"{k}{n}={v:.3f}" for (k, n), v in cell.items())


def test_7_hardware_model():
    with criterion(7, "PMU conservation, order-free aggregation, identity soundness, attacks flagged") as d:
        # aggregation vs brute force under 10,000 random arrival orders
        rnd = random.Random(7)
        for _ in range(10_000):
            n = rnd.randint(1, 15)
            metrics = [[rnd.randrange(0, 2**24) for _ in range(8)] for _ in range(n)]
            packets = [PmuPacket(sm, rnd.randrange(100), tuple(m)) for sm, m in enumerate(metrics)]
            ts = packets[0].ts
            packets = [PmuPacket(p.sm_id, ts, p.metrics) for p in packets]
            rnd.shuffle(packets)
            cache = AggregationCache()
            out = [cache.receive(p, n) for p in packets]
            assert all(o is None for o in out[:-1])  # act never fires early
            assert list(out[-1].metrics) == brute_sum(metrics)

        wl = preset("alexnet")
        cfg = HwSimConfig()
        golden = build_hw_golden(wl.program, cfg, range(32))
        runs = 0
        for s in range(20):
            r = run_hwsim(wl.program.with_seed(100 + s), cfg, True, golden)
            assert r.conservation_ok and not r.overflow
            runs += 1

        # identical traces never flag at any tau >= 0
        rng = np.random.default_rng(1)
        for s in range(10):
            g1 = build_hw_golden(wl.program, cfg, [s])
            tau = tuple(float(x) for x in rng.choice([0.0, 0.5, 3.0, 1e6], 8))
            c = HwSimConfig(validator=HwValidatorConfig(tau_override=tau))
            r = run_hwsim(wl.program.with_seed(s), c, True, g1)
            assert r.decision is Decision.BENIGN and r.conservation_ok
            runs += 1

        spec = AttackSpec.default(AttackKind.BUFFER_OVERFLOW)
        attacked = inject_buffer_overflow(wl.program, spec)
        ea = expected_rates(attacked.kernels[0][0], list(LINE_EVENTS))
        eb = expected_rates(wl.program.kernels[0][0], list(LINE_EVENTS))
        first = int(np.flatnonzero(np.any(ea != eb, axis=1))[0])
        worst = 0.0
        for s in range(100):
            r = run_hwsim(attacked.with_seed(3000 + s), cfg, True, golden)
            assert r.conservation_ok and not r.overflow
            assert r.decision is Decision.COMPROMISED
            assert (r.flagged_kernel, r.flagged_ts) == (0, first)
            assert r.dtw[r.flagged_kernel] < 0.1
            worst = max(worst, r.dtw[r.flagged_kernel])
            runs += 1
        d["info"] = f"{runs} runs conserved, BO flagged at window {first} 100/100, max DTW {worst:.3f}"


def test_8_overhead_sanity():
    with criterion(8, "overhead >= 0, zero at infinite bandwidth, non-increasing over a 5-point sweep") as d:
        bws = [0.2, 0.25, 0.3, 0.5, math.inf]
        cfg = CampaignConfig.from_dict({"presets": list(PRESET_NAMES),
                                        "hwsim": {"runs": 2, "golden_runs": 16, "bandwidths": bws}})
        rows = hwsim_study(cfg)
        by_run = {}
        for r in rows:
            label, _, bw = r["config"].rpartition(":bw=")
            by_run.setdefault(label, []).append(r["overhead"])
        assert len(by_run) == 12
        peak = 0.0
        for label, ov in by_run.items():
            assert len(ov) == 5
            assert all(o >= 0 for o in ov), (label, ov)
            assert ov[-1] == 0, (label, ov)
            assert all(x >= y for x, y in zip(ov, ov[1:])), (label, ov)
            peak = max(peak, ov[0])
        d["info"] = f"max overhead {100 * peak:.3f}% at bandwidth {bws[0]}"


CLI_CONFIG = """
presets: [bitonicSort, alexnet]
seed: 11
sizes: {golden: 8, normal: 5, attack: 5}
attacks: [BufferOverflow, MindControl, Rowhammer, Slowdown]
keep_every: [1, 4]
noise: {traces: 3, golden: 5}
hwsim: {runs: 1, golden_runs: 8}
"""


def _snapshot(path):
    return {p: (path / p).read_bytes() for p in sorted(os.listdir(path))}


def test_9_reproducibility(tmp_path):
    with criterion(9, "CLI reruns are byte-identical; trace and model formats round-trip") as d:
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(CLI_CONFIG)
        trace_file = tmp_path / "trace.csv"
        wl = preset("alexnet")
        trace_file.write_bytes(dumps_trace(simulate(wl.program.with_seed(4), DEVICE, compute_group())))
        prof = tmp_path / "prof.csv"
        g = compute_group()
        prof.write_text("sample_ordinal,event_name,instance_id,value\n" + "".join(
            f"{w},{e},{i},{(w * 31 + i) % 17}\n" for w in range(4) for e in g.names for i in range(g.instances)))
        files = 0
        for run in ("a", "b"):
            out = tmp_path / run
            with contextlib.redirect_stdout(io.StringIO()):
                for cmd in ("build-golden", "campaign", "noise-study", "hwsim"):
                    assert main([cmd, "-c", str(cfg), "-o", str(out / cmd)]) == 0
                assert main(["ingest", str(prof), "-o", str(out / "ingest")]) == 0
                gold = out / "campaign" / "golden_alexnet_compute.json"
                assert main(["validate", str(trace_file), str(gold), "-o", str(out / "validate")]) == 0
        for cmd in ("build-golden", "campaign", "noise-study", "hwsim", "ingest", "validate"):
            a, b = _snapshot(tmp_path / "a" / cmd), _snapshot(tmp_path / "b" / cmd)
            assert a and a == b, cmd
            files += len(a)

        @settings(max_examples=300, deadline=None)
        @given(traces())
        def trace_round_trip(t):
            data = dumps_trace(t)
            back = loads_trace(data)
            assert back == t and dumps_trace(back) == data

        @settings(max_examples=150, deadline=None)
        @given(golden_models())
        def model_round_trip(m):
            data = dumps_golden(m)
            back = loads_golden(data)
            assert back == m and dumps_golden(back) == data

        trace_round_trip()
        model_round_trip()
        d["info"] = f"{files} output files identical across reruns"
