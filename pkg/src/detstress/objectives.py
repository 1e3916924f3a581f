"""The three minimized objectives and the candidate evaluation pipeline.

All objectives live in [0, 1] and are minimized: f1 is the mean confidence
of best same-class matches, f2 the mean best same-class IoU, and f3 the
perturbation budget (affected-area fraction times the normalized 95th
percentile of the realized per-pixel change).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .detection import Annotation, DatasetItem, Detection, best_same_class_match
from .detectors import Detector, DetectorError
from .perturbation import MaskGrid, PerturbationGenome, apply_perturbation, gaussian_mask

DEFAULT_CONF_FLOOR = 0.25


@dataclass(frozen=True)
class ObjectiveVector:
    f1: float  # mean matched confidence
    f2: float  # mean matched IoU
    f3: float  # perturbation budget

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.f1, self.f2, self.f3)


@dataclass(frozen=True)
class EvaluatedCandidate:
    genome: PerturbationGenome
    objectives: ObjectiveVector
    predictions: tuple[Detection, ...]  # on the perturbed image, conf-floor filtered
    evaluation_index: int
    valid: bool = True
    error: Optional[str] = None


def confidence_objective(gts: Sequence[Annotation],
                         preds: Sequence[Detection]) -> float:
    """Mean confidence of the best same-class match per object (0 when absent)."""
    if not gts:
        raise ValueError("confidence objective undefined for zero annotations")
    total = 0.0
    for gt in gts:
        match = best_same_class_match(gt, preds)
        if match is not None:
            total += match[0].confidence
    return total / len(gts)


def localization_objective(gts: Sequence[Annotation],
                           preds: Sequence[Detection]) -> float:
    """Mean best same-class IoU per object (0 when absent)."""
    if not gts:
        raise ValueError("localization objective undefined for zero annotations")
    total = 0.0
    for gt in gts:
        match = best_same_class_match(gt, preds)
        if match is not None:
            total += match[1]
    return total / len(gts)


def percentile_linear(values: np.ndarray, q: float) -> float:
    """q-th percentile by linear interpolation between order statistics."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = len(v)
    if n == 0:
        raise ValueError("percentile of an empty sample")
    if n == 1:
        return float(v[0])
    h = (n - 1) * (q / 100.0)
    lo = int(math.floor(h))
    if lo + 1 >= n:
        return float(v[-1])
    frac = h - lo
    return float(v[lo] + frac * (v[lo + 1] - v[lo]))


def budget_objective(mask_weights: np.ndarray,
                     deltas: tuple[float, float, float],
                     epsilon: float,
                     image_size: tuple[int, int] | None = None) -> float:
    """Perturbation budget: affected-area fraction times normalized 95th-percentile magnitude.

    A pixel is affected when weight * max_c |delta_c| >= 0.5, i.e. when at
    least one channel rounds to a change of one intensity unit or more, so
    the support equals the set of pixels the renderer can actually modify.
    The percentile uses linear interpolation between order statistics.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if isinstance(mask_weights, MaskGrid):
        mask_weights = mask_weights.weights
    max_delta = max(abs(d) for d in deltas)
    if max_delta == 0.0:
        return 0.0
    magnitudes = mask_weights * max_delta
    affected = magnitudes >= 0.5
    n_affected = int(np.count_nonzero(affected))
    if n_affected == 0:
        return 0.0
    if image_size is None:
        h, w = mask_weights.shape
    else:
        w, h = image_size
    mag95 = percentile_linear(magnitudes[affected], 95.0)
    area_frac = n_affected / float(w * h)
    return area_frac * mag95 / epsilon


def conf_filter(preds: Sequence[Detection], conf_floor: float) -> tuple[Detection, ...]:
    """Drop detections below the reporting floor before matching and analysis."""
    return tuple(p for p in preds if p.confidence >= conf_floor)


def evaluate_candidate(item: DatasetItem,
                       genome: PerturbationGenome,
                       detector: Detector,
                       *,
                       epsilon: float,
                       conf_floor: float = DEFAULT_CONF_FLOOR,
                       evaluation_index: int = 0) -> EvaluatedCandidate:
    """Render the perturbed image, query the detector once, and score the candidate.

    Detector failures mark the candidate invalid (worst-corner objectives)
    so it is excluded from archives while the error is preserved for the
    campaign report.
    """
    if not item.annotations:
        raise ValueError(f"item {item.image_id} has no annotations")
    mask = gaussian_mask(genome, item.image_size)
    perturbed = apply_perturbation(item.image, genome, mask=mask)
    f3 = budget_objective(mask.weights, genome.deltas_bgr(), epsilon)
    try:
        raw_preds = detector.detect(perturbed)
    except DetectorError as exc:
        return EvaluatedCandidate(
            genome=genome,
            objectives=ObjectiveVector(1.0, 1.0, 1.0),
            predictions=(),
            evaluation_index=evaluation_index,
            valid=False,
            error=str(exc),
        )
    preds = conf_filter(raw_preds, conf_floor)
    f1 = confidence_objective(item.annotations, preds)
    f2 = localization_objective(item.annotations, preds)
    return EvaluatedCandidate(
        genome=genome,
        objectives=ObjectiveVector(f1, f2, f3),
        predictions=preds,
        evaluation_index=evaluation_index,
    )
