"""Hypervolume indicator and nonparametric comparison statistics.

The hypervolume is the exact volume (minimization convention) dominated by
a point set relative to a reference point, computed by a z-sweep over
2-D staircase areas.  The test battery consists of the Wilcoxon
signed-rank test (paired), the Mann-Whitney U test (unpaired), the
rank-biserial correlation, and the Vargha-Delaney A12 effect size, with
exact small-sample branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

DEFAULT_REFERENCE = (1.0, 1.0, 1.0)

# |A12 - 0.5| boundaries for negligible / small / medium / large.
EFFECT_BOUNDARIES = (0.06, 0.14, 0.21)

WILCOXON_EXACT_MAX_N = 25
MWU_EXACT_MAX_PRODUCT = 400


@dataclass(frozen=True)
class HvConfig:
    reference: tuple[float, float, float] = DEFAULT_REFERENCE


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class, despite the name

    statistic: float
    p_value: float
    effect_size: float
    effect_label: str
    method: str  # exact | normal | degenerate


def _as_point(p) -> tuple[float, ...]:
    if hasattr(p, "as_tuple"):
        return p.as_tuple()
    return tuple(float(v) for v in p)


def _staircase_area_2d(points: list[tuple[float, float]],
                       ref_x: float, ref_y: float) -> float:
    """Area of the union of boxes [x_i, ref_x] x [y_i, ref_y]."""
    if not points:
        return 0.0
    points = sorted(points)
    staircase = []
    best_y = math.inf
    for x, y in points:
        if y < best_y:
            staircase.append((x, y))
            best_y = y
    area = 0.0
    for i, (x, y) in enumerate(staircase):
        next_x = staircase[i + 1][0] if i + 1 < len(staircase) else ref_x
        area += (next_x - x) * (ref_y - y)
    return area


def hypervolume(points: Sequence, ref: Sequence[float] = DEFAULT_REFERENCE) -> float:
    """Exact 3-D hypervolume of the region dominated by `points` within `ref`.

    Minimization convention: each point contributes the box [point, ref].
    Points with any coordinate at or beyond the reference contribute
    nothing; coordinates are clamped below at 0.
    """
    ref = tuple(float(v) for v in ref)
    if len(ref) != 3:
        raise ValueError("the hypervolume indicator is 3-D only")
    pts = []
    for p in points:
        x, y, z = (max(v, 0.0) for v in _as_point(p))
        if x < ref[0] and y < ref[1] and z < ref[2]:
            pts.append((x, y, z))
    if not pts:
        return 0.0
    pts.sort(key=lambda p: p[2])
    z_levels = sorted({p[2] for p in pts})
    volume = 0.0
    active: list[tuple[float, float]] = []
    idx = 0
    for li, z in enumerate(z_levels):
        while idx < len(pts) and pts[idx][2] == z:
            active.append((pts[idx][0], pts[idx][1]))
            idx += 1
        z_next = z_levels[li + 1] if li + 1 < len(z_levels) else ref[2]
        volume += _staircase_area_2d(active, ref[0], ref[1]) * (z_next - z)
    return volume


# --- ranking helpers ---------------------------------------------------------

def _average_ranks(values: Sequence[float]) -> list[float]:
    """Fractional ranking: ties get the mean of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _label_from_distance(distance: float) -> str:
    if distance < EFFECT_BOUNDARIES[0]:
        return "negligible"
    if distance < EFFECT_BOUNDARIES[1]:
        return "small"
    if distance < EFFECT_BOUNDARIES[2]:
        return "medium"
    return "large"


def effect_label_a12(a12: float) -> str:
    return _label_from_distance(abs(a12 - 0.5))


def effect_label_rank_biserial(r: float) -> str:
    # r maps onto the paired win fraction as (r + 1) / 2, so |r| / 2 is the
    # A12-style distance from 0.5 and shares the same boundaries.
    return _label_from_distance(abs(r) / 2.0)


# --- rank-biserial and Vargha-Delaney ----------------------------------------

def rank_biserial(pairs: Sequence[tuple[float, float]]) -> float:
    """(wins - losses) / total pairs; ties count in the denominator only."""
    if not pairs:
        raise ValueError("rank-biserial undefined for zero pairs")
    wins = sum(1 for a, b in pairs if a > b)
    losses = sum(1 for a, b in pairs if a < b)
    return (wins - losses) / len(pairs)


def vargha_delaney(a: Sequence[float], b: Sequence[float]) -> tuple[float, str]:
    """A12 = P(a > b) + 0.5 P(a = b) over all cross pairs, with its label."""
    if not a or not b:
        raise ValueError("Vargha-Delaney requires two non-empty samples")
    wins = 0.0
    for x in a:
        for y in b:
            if x > y:
                wins += 1.0
            elif x == y:
                wins += 0.5
    a12 = wins / (len(a) * len(b))
    return a12, effect_label_a12(a12)


# --- Wilcoxon signed-rank -----------------------------------------------------

def _wilcoxon_exact_p(ranks: list[float], w_plus: float) -> float:
    """Two-sided exact p by enumerating the sign distribution of W+.

    Average ranks are multiples of 0.5, so doubling gives an integer
    convolution.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    coeff = [0] * (total + 1)
    coeff[0] = 1
    for d in doubled:
        nxt = coeff[:]
        for s in range(total - d + 1):
            if coeff[s]:
                nxt[s + d] += coeff[s]
        coeff = nxt
    denom = float(2 ** len(ranks))
    w2 = int(round(2 * w_plus))
    cdf = sum(coeff[: w2 + 1]) / denom
    sf = sum(coeff[w2:]) / denom
    return min(1.0, 2.0 * min(cdf, sf))


def wilcoxon_signed_rank(pairs: Sequence[tuple[float, float]]) -> TestResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; tied absolute differences get average
    ranks.  The null distribution is exact (sign enumeration) for up to 25
    nonzero pairs, and a normal approximation with continuity and tie
    correction above.  The effect size is the rank-biserial correlation
    over all pairs.
    """
    if not pairs:
        raise ValueError("wilcoxon requires at least one pair")
    effect = rank_biserial(pairs)
    label = effect_label_rank_biserial(effect)
    diffs = [a - b for a, b in pairs if a != b]
    if not diffs:
        return TestResult(statistic=0.0, p_value=1.0, effect_size=0.0,
                          effect_label="negligible", method="degenerate")
    ranks = _average_ranks([abs(d) for d in diffs])
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, diffs) if d < 0)
    statistic = min(w_plus, w_minus)
    n = len(diffs)
    if n <= WILCOXON_EXACT_MAX_N:
        p = _wilcoxon_exact_p(ranks, w_plus)
        method = "exact"
    else:
        mu = sum(ranks) / 2.0
        # Var(W+) = sum(r_i^2) / 4, equivalent to the tie-corrected
        # n(n+1)(2n+1)/24 - sum(t^3 - t)/48 form.
        sigma = math.sqrt(sum(r * r for r in ranks) / 4.0)
        if sigma == 0.0:
            p = 1.0
        else:
            diff = w_plus - mu
            correction = 0.5 * (1 if diff > 0 else -1 if diff < 0 else 0)
            z = (diff - correction) / sigma
            p = min(1.0, 2.0 * _normal_sf(abs(z)))
        method = "normal"
    return TestResult(statistic=statistic, p_value=p, effect_size=effect,
                      effect_label=label, method=method)


# --- Mann-Whitney U ------------------------------------------------------------

def _mwu_exact_distribution(m: int, n: int) -> list[int]:
    """Number of rank arrangements producing each U value, via DP."""
    # g(i, j, u): ways to interleave i a's and j b's with U = u, where U
    # counts (a, b) pairs with a ranked above b.  Recurrence: the largest
    # rank is an a (adds j to U) or a b (adds 0).
    max_u = m * n
    table = [[ [0]*(max_u+1) for _ in range(n+1)] for _ in range(m+1)]
    table[0][0][0] = 1
    for i in range(m + 1):
        for j in range(n + 1):
            for u in range(max_u + 1):
                v = table[i][j][u]
                if not v:
                    continue
                if i < m and u + j <= max_u:
                    table[i + 1][j][u + j] += v
                if j < n:
                    table[i][j + 1][u] += v
    return table[m][n]


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Two-sided Mann-Whitney U test with the Vargha-Delaney A12 effect size.

    Exact permutation distribution when m*n <= 400 and the samples are
    tie-free; otherwise a normal approximation with tie correction.
    """
    if not a or not b:
        raise ValueError("mann-whitney requires two non-empty samples")
    m, n = len(a), len(b)
    a12, label = vargha_delaney(a, b)
    u1 = a12 * m * n  # wins + half-ties
    u2 = m * n - u1
    statistic = min(u1, u2)
    combined = list(a) + list(b)
    has_ties = len(set(combined)) != len(combined)
    if m * n <= MWU_EXACT_MAX_PRODUCT and not has_ties:
        counts = _mwu_exact_distribution(m, n)
        total = math.comb(m + n, m)
        u = int(round(statistic))
        cdf = sum(counts[: u + 1]) / total
        p = min(1.0, 2.0 * cdf)
        method = "exact"
    else:
        ranks = _average_ranks(combined)
        mu = m * n / 2.0
        big_n = m + n
        seen: dict[float, int] = {}
        for v in combined:
            seen[v] = seen.get(v, 0) + 1
        tie_term = sum(t ** 3 - t for t in seen.values())
        var = m * n / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
        if var <= 0:
            p = 1.0
        else:
            z = (u1 - mu) / math.sqrt(var)
            p = min(1.0, 2.0 * _normal_sf(abs(z)))
        method = "normal"
    return TestResult(statistic=statistic, p_value=p, effect_size=a12,
                      effect_label=label, method=method)
