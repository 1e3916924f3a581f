"""Gaussian-patch perturbations: genome, bounds, sampling, repair, rendering.

A candidate perturbation is a 7-parameter genome: patch center (c_x, c_y),
patch radius r, Gaussian spread ratio alpha_ratio (sigma = alpha_ratio * r),
and per-channel intensity shifts (delta_b, delta_g, delta_r).  The mask
weight at a pixel is exp(-d^2 / (2 sigma^2)) for center distance d <= r and
exactly 0 outside the radius-r disk.  Note the deliberate naming split:
`alpha_ratio` is the spread ratio while per-pixel mask values are called
mask weights, so the two cannot be conflated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import RoiRegion

# Feasible ranges for the scalar genome fields.
RADIUS_RANGE = (8.0, 80.0)
ALPHA_RATIO_RANGE = (0.15, 0.80)
DELTA_ABS_MAX = 48.0


class EmptyRoiError(ValueError):
    """Raised when an operation needs a perturbation region but the image has none."""


@dataclass(frozen=True)
class PerturbationGenome:
    """One localized Gaussian patch: center, radius, spread ratio, channel shifts."""

    c_x: float
    c_y: float
    r: float
    alpha_ratio: float
    delta_b: float
    delta_g: float
    delta_r: float

    @property
    def sigma(self) -> float:
        """Gaussian standard deviation, derived as alpha_ratio * r."""
        return self.alpha_ratio * self.r

    def deltas_bgr(self) -> tuple[float, float, float]:
        return (self.delta_b, self.delta_g, self.delta_r)

    def deltas_rgb_array(self) -> np.ndarray:
        """Channel shifts ordered to match RGB image arrays."""
        return np.array([self.delta_r, self.delta_g, self.delta_b], dtype=np.float64)

    def as_vector(self) -> tuple[float, ...]:
        return (self.c_x, self.c_y, self.r, self.alpha_ratio,
                self.delta_b, self.delta_g, self.delta_r)


@dataclass(frozen=True)
class GenomeBounds:
    """Feasible set for genomes: scalar ranges plus the spatial ROI constraint."""

    roi: RoiRegion
    r_min: float = RADIUS_RANGE[0]
    r_max: float = RADIUS_RANGE[1]
    alpha_min: float = ALPHA_RATIO_RANGE[0]
    alpha_max: float = ALPHA_RATIO_RANGE[1]
    delta_abs_max: float = DELTA_ABS_MAX

    def __post_init__(self):
        if self.r_min > self.r_max or self.alpha_min > self.alpha_max:
            raise ValueError("bound minima must not exceed maxima")
        if self.delta_abs_max <= 0:
            raise ValueError("delta_abs_max must be positive")

    @property
    def epsilon(self) -> float:
        """Maximum allowed per-channel perturbation magnitude."""
        return self.delta_abs_max

    def validate(self, genome: PerturbationGenome) -> None:
        if not (self.r_min <= genome.r <= self.r_max):
            raise ValueError(f"radius {genome.r} outside [{self.r_min}, {self.r_max}]")
        if not (self.alpha_min <= genome.alpha_ratio <= self.alpha_max):
            raise ValueError(
                f"alpha_ratio {genome.alpha_ratio} outside "
                f"[{self.alpha_min}, {self.alpha_max}]")
        for d in genome.deltas_bgr():
            if abs(d) > self.delta_abs_max:
                raise ValueError(f"delta {d} outside +/-{self.delta_abs_max}")
        if not self.roi.contains(genome.c_x, genome.c_y):
            raise ValueError(f"center ({genome.c_x}, {genome.c_y}) outside ROI")

    def scalar_low_high(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-variable operator bounds in genome-vector order.

        Centers range over the ROI's bounding rectangle; repair projects
        them back into the ROI union afterwards.
        """
        rect = self.roi.bounding_rectangle()
        low = np.array([rect.x_min, rect.y_min, self.r_min, self.alpha_min,
                        -self.delta_abs_max, -self.delta_abs_max, -self.delta_abs_max])
        high = np.array([rect.x_max, rect.y_max, self.r_max, self.alpha_max,
                         self.delta_abs_max, self.delta_abs_max, self.delta_abs_max])
        return low, high


@dataclass(frozen=True)
class MaskGrid:
    """Per-pixel mask weights in [0, 1] over the full image, plus the producing genome."""

    weights: np.ndarray  # shape (h, w), float64
    genome: PerturbationGenome


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round half away from zero (symmetric for positive and negative shifts)."""
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def _patch_window(genome: PerturbationGenome, width: int, height: int):
    """Integer pixel-coordinate window covering the radius-r disk, clipped to the image."""
    x0 = max(0, int(math.ceil(genome.c_x - genome.r)))
    x1 = min(width - 1, int(math.floor(genome.c_x + genome.r)))
    y0 = max(0, int(math.ceil(genome.c_y - genome.r)))
    y1 = min(height - 1, int(math.floor(genome.c_y + genome.r)))
    return x0, x1, y0, y1


def gaussian_mask(genome: PerturbationGenome, image_size: tuple[int, int]) -> MaskGrid:
    """Render the Gaussian mask weights for `genome` on a (w, h) image.

    Distances are measured between the continuous patch center and pixel
    centers at integer coordinates; the weight is exp(-d^2/(2 sigma^2))
    for d <= r and 0 strictly outside the disk.
    """
    w, h = image_size
    weights = np.zeros((h, w), dtype=np.float64)
    x0, x1, y0, y1 = _patch_window(genome, w, h)
    if x1 < x0 or y1 < y0:
        return MaskGrid(weights=weights, genome=genome)
    xs = np.arange(x0, x1 + 1, dtype=np.float64) - genome.c_x
    ys = np.arange(y0, y1 + 1, dtype=np.float64) - genome.c_y
    d2 = ys[:, None] ** 2 + xs[None, :] ** 2
    sigma = genome.sigma
    local = np.exp(-d2 / (2.0 * sigma * sigma))
    local[d2 > genome.r ** 2] = 0.0
    weights[y0:y1 + 1, x0:x1 + 1] = local
    return MaskGrid(weights=weights, genome=genome)


def apply_perturbation(
    image: np.ndarray,
    genome: PerturbationGenome,
    mask: MaskGrid | None = None,
) -> np.ndarray:
    """Additively apply the masked channel shifts to an RGB uint8 image.

    Each channel becomes clip(x + round_half_away(weight * delta), 0, 255);
    pixels outside the radius-r disk are bit-identical to the input.
    """
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError("image must be an (h, w, 3) uint8 array")
    h, w = image.shape[:2]
    if mask is None:
        mask = gaussian_mask(genome, (w, h))
    out = image.copy()
    x0, x1, y0, y1 = _patch_window(genome, w, h)
    if x1 < x0 or y1 < y0:
        return out
    local = mask.weights[y0:y1 + 1, x0:x1 + 1]
    shift = round_half_away(local[:, :, None] * genome.deltas_rgb_array()[None, None, :])
    region = out[y0:y1 + 1, x0:x1 + 1].astype(np.int16) + shift.astype(np.int16)
    np.clip(region, 0, 255, out=region)
    out[y0:y1 + 1, x0:x1 + 1] = region.astype(np.uint8)
    return out


def sample_genome(rng: np.random.Generator, bounds: GenomeBounds) -> PerturbationGenome:
    """Draw one genome uniformly at random within the bounds.

    The center is drawn by picking one ROI box uniformly, then a uniform
    point within it; the remaining fields are uniform in their ranges.
    """
    roi = bounds.roi
    if roi.is_empty:
        raise EmptyRoiError("cannot sample a perturbation center: image has no ROI "
                            "(no annotations)")
    box = roi.boxes[int(rng.integers(len(roi.boxes)))]
    c_x = float(rng.uniform(box.x_min, box.x_max)) if box.width > 0 else box.x_min
    c_y = float(rng.uniform(box.y_min, box.y_max)) if box.height > 0 else box.y_min
    r = float(rng.uniform(bounds.r_min, bounds.r_max))
    alpha = float(rng.uniform(bounds.alpha_min, bounds.alpha_max))
    db = float(rng.uniform(-bounds.delta_abs_max, bounds.delta_abs_max))
    dg = float(rng.uniform(-bounds.delta_abs_max, bounds.delta_abs_max))
    dr = float(rng.uniform(-bounds.delta_abs_max, bounds.delta_abs_max))
    return PerturbationGenome(c_x=c_x, c_y=c_y, r=r, alpha_ratio=alpha,
                              delta_b=db, delta_g=dg, delta_r=dr)


def repair_genome(raw: Sequence[float], bounds: GenomeBounds) -> PerturbationGenome:
    """Map a raw 7-vector onto the feasible set.

    Scalar fields are clipped to their ranges; the center is projected to
    the nearest point of the nearest ROI box.  Idempotent by construction.
    """
    if bounds.roi.is_empty:
        raise EmptyRoiError("cannot repair a genome against an empty ROI")
    c_x, c_y, r, alpha, db, dg, dr = (float(v) for v in raw)
    if not bounds.roi.contains(c_x, c_y):
        c_x, c_y = bounds.roi.nearest_point(c_x, c_y)
    clamp = lambda v, lo, hi: min(max(v, lo), hi)
    return PerturbationGenome(
        c_x=c_x,
        c_y=c_y,
        r=clamp(r, bounds.r_min, bounds.r_max),
        alpha_ratio=clamp(alpha, bounds.alpha_min, bounds.alpha_max),
        delta_b=clamp(db, -bounds.delta_abs_max, bounds.delta_abs_max),
        delta_g=clamp(dg, -bounds.delta_abs_max, bounds.delta_abs_max),
        delta_r=clamp(dr, -bounds.delta_abs_max, bounds.delta_abs_max),
    )


# --- CSV wire format -------------------------------------------------------
#
# Genomes serialize to 7 columns (c_x, c_y, r, alpha_ratio, delta_b,
# delta_g, delta_r) with 6 decimal places; this is the replay and
# transferability interchange format.

GENOME_CSV_FIELDS = ("c_x", "c_y", "r", "alpha_ratio", "delta_b", "delta_g", "delta_r")


def genome_to_csv_fields(genome: PerturbationGenome) -> list[str]:
    return [f"{v:.6f}" for v in genome.as_vector()]


def genome_from_csv_fields(fields: Sequence[str]) -> PerturbationGenome:
    if len(fields) != 7:
        raise ValueError(f"expected 7 genome columns, got {len(fields)}")
    vals = [float(f) for f in fields]
    return PerturbationGenome(*vals)
