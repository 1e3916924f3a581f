"""Independent oracle implementations for verification.

Everything in this module deliberately avoids the library's own code paths:
rasterized IoU, per-pixel budget recomputation, exhaustive-assignment
failure classification, sign/permutation enumeration for the tests, and
Monte-Carlo hypervolume.  Oracles stay naive and obviously-correct.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def iou_rasterized(box_a, box_b, extent: int = 220) -> float:
    """IoU by counting unit cells whose centers fall in each closed box."""
    xs = np.arange(extent) + 0.5
    ys = np.arange(extent) + 0.5
    gx, gy = np.meshgrid(xs, ys)

    def occupancy(box):
        return ((gx >= box.x_min) & (gx <= box.x_max)
                & (gy >= box.y_min) & (gy <= box.y_max))

    in_a = occupancy(box_a)
    in_b = occupancy(box_b)
    inter = np.count_nonzero(in_a & in_b)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return inter / union


def budget_brute_force(mask_weights, deltas, epsilon, image_size=None) -> float:
    """Per-pixel recomputation of the budget objective in pure Python."""
    h = len(mask_weights)
    w = len(mask_weights[0])
    if image_size is not None:
        w, h = image_size
    max_delta = max(abs(d) for d in deltas)
    if max_delta == 0.0:
        return 0.0
    values = []
    for row in np.asarray(mask_weights):
        for weight in row:
            v = float(weight) * max_delta
            if v >= 0.5:
                values.append(v)
    if not values:
        return 0.0
    values.sort()
    n = len(values)
    if n == 1:
        mag95 = values[0]
    else:
        pos = (n - 1) * 0.95
        lo = math.floor(pos)
        if lo + 1 >= n:
            mag95 = values[-1]
        else:
            frac = pos - lo
            mag95 = values[lo] + frac * (values[lo + 1] - values[lo])
    area_frac = n / float(w * h)
    return area_frac * mag95 / epsilon


def _pairwise_iou(gts, preds):
    from detstress.geometry import iou  # pure value function, shared on purpose
    return [[iou(g.box, p.box) for p in preds] for g in gts]


def all_one_to_one_assignments(n_gts: int, pred_candidates: list[list[int]]):
    """Yield every assignment tuple (pred index or None per gt), one-to-one."""
    def rec(gi, used, current):
        if gi == n_gts:
            yield tuple(current)
            return
        yield from rec(gi + 1, used, current + [None])
        for pi in pred_candidates[gi]:
            if pi not in used:
                yield from rec(gi + 1, used | {pi}, current + [pi])
    yield from rec(0, frozenset(), [])


def optimal_assignment(gts, preds):
    """Max-total-IoU one-to-one assignment over overlapping pairs.

    Ties are broken toward the lexicographically smallest assignment tuple
    (None sorts before indices) so the oracle is deterministic.
    """
    ious = _pairwise_iou(gts, preds)
    candidates = [[pi for pi in range(len(preds)) if ious[gi][pi] > 0.0]
                  for gi in range(len(gts))]
    best_total = -1.0
    best = None
    for assign in all_one_to_one_assignments(len(gts), candidates):
        total = sum(ious[gi][pi] for gi, pi in enumerate(assign)
                    if pi is not None)
        key = tuple(-1 if pi is None else pi for pi in assign)
        if (total > best_total + 1e-12
                or (abs(total - best_total) <= 1e-12
                    and (best is None or key < best[1]))):
            best_total = total
            best = (assign, key)
    return best[0], max(best_total, 0.0)


def classify_exhaustive(gts, preds, th):
    """Failure classification under the exhaustive optimal assignment.

    Reimplements the per-object threshold rules independently of the
    library, differing from it only in how the one-to-one assignment is
    chosen (brute force max-total-IoU instead of greedy).
    """
    ious = _pairwise_iou(gts, preds)
    assign, _ = optimal_assignment(gts, preds)
    assigned_set = {pi for pi in assign if pi is not None}
    counts = {"missed": 0, "mislocalized": 0, "misclassified": 0, "ambiguous": 0}
    outcomes = []
    for gi, gt in enumerate(gts):
        same = [ious[gi][pi] for pi in range(len(preds))
                if preds[pi].class_id == gt.class_id]
        best_same = max(same, default=0.0)
        max_any = max(ious[gi], default=0.0)
        pi = assign[gi]
        if best_same >= th.tau_loc:
            outcome = "correct"
        elif max_any < th.tau_detect:
            outcome = "missed"
        elif (pi is not None and preds[pi].class_id != gt.class_id
              and ious[gi][pi] >= th.tau_loc):
            outcome = "misclassified"
        elif best_same >= th.tau_detect:
            outcome = "mislocalized"
        else:
            outcome = "other"
        if outcome in counts:
            counts[outcome] += 1
        ambiguous = any(ious[gi][pi2] >= th.tau_dup
                        for pi2 in range(len(preds)) if pi2 not in assigned_set)
        if ambiguous:
            counts["ambiguous"] += 1
        outcomes.append((outcome, ambiguous))
    failed = sum(counts.values()) > 0
    return failed, counts, outcomes


def wilcoxon_enumeration(pairs) -> float:
    """Two-sided exact Wilcoxon p by brute enumeration of sign vectors."""
    diffs = [a - b for a, b in pairs if a != b]
    if not diffs:
        return 1.0
    absd = [abs(d) for d in diffs]
    order = sorted(range(len(absd)), key=lambda i: absd[i])
    ranks = [0.0] * len(absd)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and absd[order[j + 1]] == absd[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1.0
        i = j + 1
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    n = len(diffs)
    at_most = 0
    at_least = 0
    total = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        total += 1
        if w <= w_plus + 1e-12:
            at_most += 1
        if w >= w_plus - 1e-12:
            at_least += 1
    return min(1.0, 2.0 * min(at_most / total, at_least / total))


def mwu_enumeration(a, b) -> float:
    """Two-sided exact Mann-Whitney p by enumerating rank arrangements."""
    m, n = len(a), len(b)
    u1 = sum(1.0 for x in a for y in b if x > y) \
        + 0.5 * sum(1.0 for x in a for y in b if x == y)
    count_le = 0
    count_ge = 0
    total = 0
    positions = range(m + n)
    for a_positions in itertools.combinations(positions, m):
        a_set = set(a_positions)
        u = sum(1 for pa in a_positions for pb in positions
                if pb not in a_set and pa > pb)
        total += 1
        if u <= u1 + 1e-12:
            count_le += 1
        if u >= u1 - 1e-12:
            count_ge += 1
    return min(1.0, 2.0 * min(count_le, count_ge) / total)


def hypervolume_monte_carlo(points, ref, n_samples: int = 1_000_000,
                            seed: int = 0) -> tuple[float, float]:
    """(estimate, standard error) of the dominated fraction of the ref box."""
    rng = np.random.default_rng(seed)
    ref = np.asarray(ref, dtype=np.float64)
    samples = rng.uniform(0.0, 1.0, size=(n_samples, 3)) * ref
    dominated = np.zeros(n_samples, dtype=bool)
    for p in points:
        p = np.asarray(p, dtype=np.float64)
        dominated |= np.all(samples >= p, axis=1)
    frac = dominated.mean()
    volume_box = float(np.prod(ref))
    se = math.sqrt(max(frac * (1 - frac), 1e-12) / n_samples) * volume_box
    return frac * volume_box, se


def dominates_minimize(a, b) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def nondominated_brute(points) -> set[int]:
    keep = set()
    for i, p in enumerate(points):
        if not any(dominates_minimize(q, p) for j, q in enumerate(points) if j != i):
            keep.add(i)
    return keep
