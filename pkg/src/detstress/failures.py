"""Failure classification, failure-rate metrics, and stability analysis.

Each ground-truth object on a perturbed image is classified against the
conf-floor-filtered predictions:

* correct       -- best same-class IoU >= tau_loc
* missed        -- no prediction of any class overlaps with IoU >= tau_detect
* misclassified -- the assigned prediction (greedy one-to-one matching over
                   all classes) has IoU >= tau_loc but a different class
* mislocalized  -- best same-class IoU in [tau_detect, tau_loc)
* other         -- only wrong-class overlap below tau_loc: reported but not
                   counted as a failure (the taxonomy is ground-truth-anchored)

Independently, an object is flagged ambiguous when at least one prediction
left unassigned by the matching still overlaps it with IoU >= tau_dup
(duplicate or conflicting prediction).  A perturbation fails iff any object
contributes a missed/mislocalized/misclassified/ambiguous occurrence.

Stability deviations apply only to non-failing perturbations: per object,
the absolute change in best same-class confidence and IoU between the clean
and perturbed predictions (zero-when-absent convention), aggregated per
perturbation by max over objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .detection import Annotation, Detection, best_same_class_match, greedy_match
from .geometry import iou

FAILURE_TYPES = ("missed", "mislocalized", "misclassified", "ambiguous")
STABILITY_CATEGORIES = ("minor", "small", "moderate", "large")


@dataclass(frozen=True)
class FailureThresholds:
    """IoU thresholds for the failure taxonomy plus the reporting floor.

    tau_detect separates "misplaced" from "absent"; tau_loc is the standard
    detection-benchmark localization criterion; tau_dup flags duplicate
    predictions on one object.  All are config-exposed.
    """

    tau_detect: float = 0.1
    tau_loc: float = 0.5
    tau_dup: float = 0.5
    conf_floor: float = 0.25

    def __post_init__(self):
        if not (0.0 < self.tau_detect < self.tau_loc <= 1.0):
            raise ValueError(
                f"need 0 < tau_detect < tau_loc <= 1, got "
                f"({self.tau_detect}, {self.tau_loc})")


@dataclass(frozen=True)
class ObjectOutcome:
    """Per-object classification detail."""

    outcome: str  # correct | missed | misclassified | mislocalized | other
    ambiguous: bool
    best_same_class_iou: float
    assigned_iou: float
    assigned_class_id: Optional[int]


@dataclass(frozen=True)
class FailureRecord:
    """Failure flag and per-type occurrence counts for one perturbation."""

    failed: bool
    counts: dict[str, int]
    per_object: tuple[ObjectOutcome, ...]

    def total_occurrences(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class StabilityThresholds:
    """Category boundaries for confidence/localization deviations.

    Categories are upper-boundary inclusive: minor <= minor_max <
    small <= small_max < moderate <= moderate_max < large.  A deviation in
    the moderate or large category is a metamorphic-relation violation.
    """

    minor_max: float = 0.01
    small_max: float = 0.05
    moderate_max: float = 0.10

    def __post_init__(self):
        if not (self.minor_max < self.small_max < self.moderate_max):
            raise ValueError("stability boundaries must be strictly increasing")


@dataclass(frozen=True)
class StabilityDeviation:
    """Per-object and max-aggregated (delta_conf, delta_loc) for one perturbation."""

    per_object: tuple[tuple[float, float], ...]
    delta_conf: float
    delta_loc: float


def classify_failures(gts: Sequence[Annotation], preds: Sequence[Detection],
                      th: FailureThresholds) -> FailureRecord:
    """Classify one perturbed image's predictions against its ground truth.

    `preds` must already be filtered by the confidence floor.
    """
    if not gts:
        raise ValueError("failure classification undefined for zero annotations")
    matching = greedy_match(gts, preds, same_class_only=False)
    return classify_with_matching(gts, preds, matching.pred_index, th)


def classify_with_matching(gts: Sequence[Annotation], preds: Sequence[Detection],
                           pred_index: Sequence[Optional[int]],
                           th: FailureThresholds) -> FailureRecord:
    """Apply the per-object taxonomy under an explicit one-to-one assignment.

    Shared by the greedy path and the exhaustive-assignment oracle so that
    both use identical thresholds and rules.
    """
    assigned_set = {i for i in pred_index if i is not None}
    counts = {t: 0 for t in FAILURE_TYPES}
    outcomes = []
    for gi, gt in enumerate(gts):
        best_same = best_same_class_match(gt, preds)
        best_same_iou = best_same[1] if best_same is not None else 0.0
        max_any_iou = max((iou(gt.box, p.box) for p in preds), default=0.0)
        pi = pred_index[gi]
        assigned_iou = iou(gt.box, preds[pi].box) if pi is not None else 0.0
        assigned_class = preds[pi].class_id if pi is not None else None

        if best_same_iou >= th.tau_loc:
            outcome = "correct"
        elif max_any_iou < th.tau_detect:
            outcome = "missed"
        elif (pi is not None and assigned_class != gt.class_id
              and assigned_iou >= th.tau_loc):
            outcome = "misclassified"
        elif best_same_iou >= th.tau_detect:
            outcome = "mislocalized"
        else:
            outcome = "other"
        if outcome in counts:
            counts[outcome] += 1

        ambiguous = any(
            iou(gt.box, p.box) >= th.tau_dup
            for idx, p in enumerate(preds) if idx not in assigned_set
        )
        if ambiguous:
            counts["ambiguous"] += 1
        outcomes.append(ObjectOutcome(
            outcome=outcome,
            ambiguous=ambiguous,
            best_same_class_iou=best_same_iou,
            assigned_iou=assigned_iou,
            assigned_class_id=assigned_class,
        ))
    failed = sum(counts.values()) > 0
    return FailureRecord(failed=failed, counts=counts, per_object=tuple(outcomes))


def failure_rate(records: Sequence[FailureRecord]) -> float:
    """Fraction of perturbations that induce at least one failure."""
    if not records:
        raise ValueError("failure rate undefined for zero records")
    return sum(1 for r in records if r.failed) / len(records)


def failure_occurrences(records: Sequence[FailureRecord], failure_type: str) -> int:
    """Total object-level occurrences of one failure type."""
    if failure_type not in FAILURE_TYPES:
        raise ValueError(f"unknown failure type {failure_type!r}")
    return sum(r.counts[failure_type] for r in records)


def stability_deviation(orig_preds: Sequence[Detection],
                        pert_preds: Sequence[Detection],
                        gts: Sequence[Annotation]) -> StabilityDeviation:
    """Confidence/IoU deviation between clean and perturbed predictions.

    Intended for non-failing perturbations.  Per object, deltas use the
    best same-class match with the zero-when-absent convention; the
    per-perturbation deviation is the max over objects.
    """
    per_object = []
    for gt in gts:
        before = best_same_class_match(gt, orig_preds)
        after = best_same_class_match(gt, pert_preds)
        conf_before = before[0].confidence if before is not None else 0.0
        conf_after = after[0].confidence if after is not None else 0.0
        iou_before = before[1] if before is not None else 0.0
        iou_after = after[1] if after is not None else 0.0
        per_object.append((abs(conf_before - conf_after),
                           abs(iou_before - iou_after)))
    delta_conf = max((d for d, _ in per_object), default=0.0)
    delta_loc = max((d for _, d in per_object), default=0.0)
    return StabilityDeviation(per_object=tuple(per_object),
                              delta_conf=delta_conf, delta_loc=delta_loc)


def categorize_stability(delta: float, th: StabilityThresholds) -> str:
    """Map a deviation to its stability category (upper boundary inclusive)."""
    if not (0.0 <= delta <= 1.0):
        raise ValueError(f"deviation must be in [0, 1], got {delta}")
    if delta <= th.minor_max:
        return "minor"
    if delta <= th.small_max:
        return "small"
    if delta <= th.moderate_max:
        return "moderate"
    return "large"


def is_violation(category: str) -> bool:
    """A metamorphic-relation violation is a moderate or large deviation."""
    return category in ("moderate", "large")
