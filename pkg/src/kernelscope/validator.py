"""Software validation of untested traces and TPR/FPR campaigns."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import KernelScopeError
from .golden import GoldenModel, select_reference
from .model import Decision, SegmentMatch, Trace, Verdict, decide
from .segmentation import MarkerSpec, segment_trace
from .similarity import match_segment


def _align(observed: Sequence[int], expected: Sequence[int]):
    """Greedy subsequence alignment of observed config ids onto expected ones.

    Returns the expected ordinal of every observed segment, or ``None`` when
    ``observed`` is not a subsequence of ``expected``.
    """
    ordinals, j = [], 0
    for cid in observed:
        while j < len(expected) and expected[j] != cid:
            j += 1
        if j == len(expected):
            return None
        ordinals.append(j)
        j += 1
    return ordinals


def validate_trace(trace: Trace, model: GoldenModel, marker: Optional[MarkerSpec] = None) -> Verdict:
    """Segment, match each kernel against its reference, apply the rejection policy.

    Structural problems (unpaired or undecodable markers, skipped or
    unexpected kernels) never yield Benign: the verdict is Incomplete with a
    diagnostic unless a long enough rejection run already makes it
    Compromised.
    """
    marker = marker or model.marker
    policy = model.policy
    if trace.group != model.group or trace.device != model.device:
        return decide((), policy.reject_run_len, ("trace group/device differs from the model",), -1)
    try:
        segments = segment_trace(trace, marker)
    except KernelScopeError as exc:
        return decide((), policy.reject_run_len, (f"segmentation failed: {exc}",), -1)

    observed = [s.config_id for s in segments]
    expected = list(model.sequence) or observed
    diagnostics = []
    structural = None
    ordinals = list(range(len(segments)))
    if observed != expected:
        aligned = _align(observed, expected)
        if aligned is not None:
            ordinals = aligned
            present = set(aligned)
            missing = [k for k in range(len(expected)) if k not in present]
            structural = missing[0]
            for k in missing:
                diagnostics.append(f"missing segment: kernel {k} (config {expected[k]})")
        else:
            structural = -1
            diagnostics.append(f"unexpected kernel sequence {observed}, expected {expected}")

    matches = []
    for seg, ordinal in zip(segments, ordinals):
        try:
            ref = select_reference(model, seg.config_id)
        except KernelScopeError as exc:
            diagnostics.append(str(exc))
            matches.append(SegmentMatch(ordinal, 0.0, False, seg.config_id))
            structural = ordinal if structural is None else structural
            continue
        res = match_segment(seg, ref, policy.tau_corr, policy.min_overlap_frac)
        if res.diagnostic:
            diagnostics.append(f"kernel {ordinal}: {res.diagnostic}")
        matches.append(SegmentMatch(ordinal, res.coefficient, res.matched, seg.config_id, res.lag))
    return decide(matches, policy.reject_run_len, diagnostics, structural)


def validate_stream(verdicts: Sequence[Verdict], reject_run_len: int) -> list:
    """Alternative policy: count rejections across consecutive runs of a stream.

    A run is a rejection when any of its segments failed or it is not Benign;
    every run that completes a streak of ``reject_run_len`` rejections is
    flagged.
    """
    flags, streak = [], 0
    for v in verdicts:
        rejected = v.decision is not Decision.BENIGN or any(not m.matched for m in v.per_segment)
        streak = streak + 1 if rejected else 0
        flags.append(streak >= reject_run_len)
    return flags


@dataclass(frozen=True)
class CampaignReport:
    tpr: Optional[float]
    fpr: Optional[float]
    normal: tuple  # Verdicts
    attack: tuple
    dataset_sizes: dict

    @property
    def per_trace(self) -> tuple:
        return self.normal + self.attack

    def to_dict(self) -> dict:
        return {
            "tpr": self.tpr,
            "fpr": self.fpr,
            "dataset_sizes": dict(self.dataset_sizes),
            "decisions": {
                name: _decision_counts(vs) for name, vs in (("normal", self.normal), ("attack", self.attack))
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def verdict_rows(self) -> list:
        rows = []
        for name, verdicts in (("normal", self.normal), ("attack", self.attack)):
            for i, v in enumerate(verdicts):
                mc = v.min_coefficient
                rows.append({
                    "trace_id": f"{name}-{i:04d}",
                    "decision": v.decision.value,
                    "max_run": v.max_consecutive_rejections,
                    "flagged_kernel": "" if v.flagged_kernel is None else v.flagged_kernel,
                    "min_coefficient": "" if mc is None else f"{mc:.6f}",
                })
        return rows

    def verdicts_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, VERDICT_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(self.verdict_rows())
        return buf.getvalue()


VERDICT_COLUMNS = ("trace_id", "decision", "max_run", "flagged_kernel", "min_coefficient")


def _decision_counts(verdicts) -> dict:
    out = {d.value: 0 for d in Decision}
    for v in verdicts:
        out[v.decision.value] += 1
    return out


def _positive_rate(verdicts) -> Optional[float]:
    # Incomplete counts as positive on both datasets.
    if not verdicts:
        return None
    return sum(v.decision is not Decision.BENIGN for v in verdicts) / len(verdicts)


def summarize(normal: Sequence[Verdict], attack: Sequence[Verdict], golden_size: int = 0) -> CampaignReport:
    normal, attack = tuple(normal), tuple(attack)
    sizes = {"golden": golden_size, "normal": len(normal), "attack": len(attack)}
    return CampaignReport(_positive_rate(attack), _positive_rate(normal), normal, attack, sizes)


def run_campaign(model: GoldenModel, normal: Sequence[Trace], attack: Sequence[Trace], marker=None,
                 golden_size: int = 0) -> CampaignReport:
    normal_v = [validate_trace(t, model, marker) for t in normal]
    attack_v = [validate_trace(t, model, marker) for t in attack]
    return summarize(normal_v, attack_v, golden_size)
