"""Slow, obviously-correct reference implementations used as test oracles."""

import itertools
import math
from functools import lru_cache


def pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return 0.0
    return sxy / math.sqrt(sxx * syy)


def xcorr_oracle(a, b, min_overlap_frac=0.5):
    """Every lag, every channel, plain Python sums.  Returns {lag: coefficient}."""
    a = [list(map(float, ch)) for ch in a]
    b = [list(map(float, ch)) for ch in b]
    keep = [c for c in range(len(a)) if len(set(a[c])) > 1 and len(set(b[c])) > 1]
    n, m = len(a[0]), len(b[0])
    need = max(1, math.ceil(min_overlap_frac * min(n, m)))
    out = {}
    for k in range(-(n - 1), m):
        ts = [t for t in range(n) if 0 <= t + k < m]
        if len(ts) < need:
            continue
        rs = [pearson([a[c][t] for t in ts], [b[c][t + k] for t in ts]) for c in keep]
        out[k] = sum(rs) / len(rs)
    return out


def dtw_recursive(cost):
    """Memoized textbook recursion for the optimal warping cost."""
    n, m = len(cost), len(cost[0])

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0 and j == 0:
            return cost[0][0]
        best = math.inf
        if i and j:
            best = min(best, d(i - 1, j - 1))
        if i:
            best = min(best, d(i - 1, j))
        if j:
            best = min(best, d(i, j - 1))
        return cost[i][j] + best

    return d(n - 1, m - 1)


def warping_paths(n, m):
    """All monotone unit-step paths from (0, 0) to (n-1, m-1)."""
    def walk(i, j):
        if (i, j) == (n - 1, m - 1):
            yield ((i, j),)
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            if i + di < n and j + dj < m:
                for rest in walk(i + di, j + dj):
                    yield ((i, j),) + rest
    return list(walk(0, 0))


def dtw_enumerate(cost):
    """Minimum over every warping path; returns (cost, set of optimal path lengths)."""
    n, m = len(cost), len(cost[0])
    best, lengths = math.inf, set()
    for path in warping_paths(n, m):
        s = 0.0
        for i, j in path:
            s = s + cost[i][j]
        if s < best:
            best, lengths = s, {len(path)}
        elif s == best:
            lengths.add(len(path))
    return best, lengths


def euclid_costs(a, b):
    return [[math.sqrt(sum((a[c][i] - b[c][j]) ** 2 for c in range(len(a)))) for j in range(len(b[0]))]
            for i in range(len(a[0]))]


def brute_sum(packets):
    acc = [0] * len(packets[0])
    for p in packets:
        acc = [x + y for x, y in zip(acc, p)]
    return acc


def all_orders(items):
    return itertools.permutations(items)
