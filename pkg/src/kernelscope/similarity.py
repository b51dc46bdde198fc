"""Time-series comparison: lag-searching Pearson correlation and normalized DTW.

Series are float arrays shaped ``[channel, time]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateInput


class Reduction(str, enum.Enum):
    SUM_INSTANCES = "SumInstances"
    PER_INSTANCE = "PerInstance"


@dataclass(frozen=True)
class XcorrResult:
    best_lag: int
    coefficient: float
    overlap_len: int


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path_len: int
    similarity: float


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    coefficient: float
    lag: int = 0
    diagnostic: Optional[str] = None


def channel_flatten(seg, reduction=Reduction.SUM_INSTANCES) -> np.ndarray:
    """Turn ``[window, event, instance]`` counts into a ``[channel, time]`` series."""
    counts = np.asarray(getattr(seg, "counts", seg), dtype=np.float64)
    if counts.shape[0] == 0:
        raise DegenerateInput("cannot flatten an empty segment")
    if Reduction(reduction) is Reduction.SUM_INSTANCES:
        return counts.sum(axis=2).T.copy()
    t, e, i = counts.shape
    return counts.reshape(t, e * i).T.copy()


def _as_series(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] == 0:
        raise DegenerateInput(f"expected a non-empty [channel, time] series, got shape {x.shape}")
    return x


def _constant(x: np.ndarray) -> np.ndarray:
    return x.max(axis=-1) == x.min(axis=-1)


def overlap_lags(n: int, m: int, min_overlap_frac: float) -> list:
    """Admissible lags ordered by preference (|lag| first, negatives before positives).

    Lag ``k`` pairs ``a[t]`` with ``b[t + k]``.
    """
    need = max(1, math.ceil(min_overlap_frac * min(n, m)))
    lags = [k for k in range(-(n - 1), m) if min(n, m - k) - max(0, -k) >= need]
    return sorted(lags, key=lambda k: (abs(k), k))


def xcorr(a, b, min_overlap_frac: float = 0.5) -> XcorrResult:
    """Best-lag mean-over-channels Pearson coefficient.

    Channels that are constant over a whole input are dropped; a channel whose
    overlap slice is constant at some lag contributes 0 there.
    """
    a, b = _as_series(a), _as_series(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError("series must have the same channel count")
    keep = ~(_constant(a) | _constant(b))
    if not keep.any():
        raise DegenerateInput("every channel is constant in at least one input")
    a, b = a[keep], b[keep]
    n, m = a.shape[1], b.shape[1]

    best = None
    for k in overlap_lags(n, m, min_overlap_frac):
        lo, hi = max(0, -k), min(n, m - k)
        x, y = a[:, lo:hi], b[:, lo + k : hi + k]
        xc = x - x.mean(axis=1, keepdims=True)
        yc = y - y.mean(axis=1, keepdims=True)
        den = np.sqrt((xc * xc).sum(axis=1) * (yc * yc).sum(axis=1))
        flat = _constant(x) | _constant(y)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(flat, 0.0, (xc * yc).sum(axis=1) / np.where(flat, 1.0, den))
        coef = float(np.clip(r.mean(), -1.0, 1.0))
        if best is None or coef > best.coefficient:
            best = XcorrResult(k, coef, hi - lo)
    return best


def dtw_path_cost(cost) -> tuple:
    """Classic DTW over a local-cost matrix with unit steps.

    Returns ``(distance, path_len)`` where ``path_len`` counts the aligned
    index pairs on the optimal path (ties prefer the diagonal step).
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    c = cost.tolist()
    inf = math.inf
    acc = [[inf] * m for _ in range(n)]
    for i in range(n):
        row, ci = acc[i], c[i]
        prev = acc[i - 1] if i else None
        for j in range(m):
            best = inf if (i or j) else 0.0
            if prev is not None:
                best = prev[j]
                if j and prev[j - 1] < best:
                    best = prev[j - 1]
            if j and row[j - 1] < best:
                best = row[j - 1]
            row[j] = ci[j] + best
    i, j, steps = n - 1, m - 1, 1
    while i or j:
        if i and j:
            moves = ((acc[i - 1][j - 1], i - 1, j - 1), (acc[i - 1][j], i - 1, j), (acc[i][j - 1], i, j - 1))
            _, i, j = min(moves, key=lambda t: t[0])
        elif i:
            i -= 1
        else:
            j -= 1
        steps += 1
    return acc[n - 1][m - 1], steps


def _znorm(x: np.ndarray) -> np.ndarray:
    # rescale to unit peak first so tiny (even subnormal) spreads do not underflow in std
    xc = x - x.mean(axis=1, keepdims=True)
    peak = np.abs(xc).max(axis=1, keepdims=True)
    flat = _constant(x)[:, None] | (peak == 0)
    xc = xc / np.where(flat, 1.0, peak)
    sd = xc.std(axis=1, keepdims=True)
    return np.where(flat, 0.0, xc / np.where(flat, 1.0, sd))


def local_costs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance between every column of ``a`` and every column of ``b``."""
    diff = a[:, :, None] - b[:, None, :]
    return np.sqrt((diff * diff).sum(axis=0))


def dtw_similarity(a, b, center=None, scale=None) -> DtwResult:
    """Path-normalized DTW similarity ``1 / (1 + distance / path_len)``.

    By default each series is z-normalized per channel on its own; channels
    constant in both inputs are dropped and a channel constant in only one
    input becomes zeros there.  Passing ``center``/``scale`` (one value per
    channel) instead normalizes both series with those shared statistics,
    which keeps absolute level shifts visible.
    """
    a, b = _as_series(a), _as_series(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError("series must have the same channel count")
    if scale is not None:
        center = np.zeros(a.shape[0]) if center is None else np.asarray(center, dtype=np.float64)
        scale = np.asarray(scale, dtype=np.float64)
        if np.any(scale <= 0):
            raise ValueError("scale must be positive")
        za, zb = (a - center[:, None]) / scale[:, None], (b - center[:, None]) / scale[:, None]
    else:
        keep = ~(_constant(a) & _constant(b))
        n, m = a.shape[1], b.shape[1]
        if not keep.any():
            distance = float(abs(n - m))
            path_len = max(n, m)
            return DtwResult(distance, path_len, 1.0 / (1.0 + distance / path_len))
        za, zb = _znorm(a[keep]), _znorm(b[keep])
    distance, path_len = dtw_path_cost(local_costs(za, zb))
    return DtwResult(distance, path_len, 1.0 / (1.0 + distance / path_len))


def match_segment(seg, ref_series, tau_corr: float = 0.8, min_overlap_frac: float = 0.5) -> MatchResult:
    """Match iff the best-lag coefficient strictly exceeds ``tau_corr``."""
    series = seg if isinstance(seg, np.ndarray) else channel_flatten(seg)
    ref = getattr(ref_series, "series", ref_series)
    try:
        res = xcorr(series, ref, min_overlap_frac)
    except DegenerateInput as exc:
        return MatchResult(False, 0.0, 0, f"degenerate input: {exc}")
    return MatchResult(res.coefficient > tau_corr, res.coefficient, res.best_lag)
