"""Axis-aligned bounding boxes, IoU, and region-of-interest construction.

Boxes are continuous-coordinate closed rectangles in the image frame
(origin top-left, x right, y down); area is width * height with no
pixel rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class BoundingBox:
    """Closed axis-aligned rectangle [x_min, x_max] x [y_min, y_max]."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"box min exceeds max: {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def expand(self, margin: float) -> "BoundingBox":
        """Grow the box by `margin` on all four sides."""
        return BoundingBox(
            self.x_min - margin,
            self.y_min - margin,
            self.x_max + margin,
            self.y_max + margin,
        )

    def clip(self, width: float, height: float) -> "BoundingBox":
        """Clip the box to the image rectangle [0, width] x [0, height]."""
        return BoundingBox(
            min(max(self.x_min, 0.0), width),
            min(max(self.y_min, 0.0), height),
            min(max(self.x_max, 0.0), width),
            min(max(self.y_max, 0.0), height),
        )

    def contains(self, x: float, y: float) -> bool:
        """Boundary-inclusive point membership."""
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def nearest_point(self, x: float, y: float) -> tuple[float, float]:
        """Euclidean projection of (x, y) onto the box."""
        return (
            min(max(x, self.x_min), self.x_max),
            min(max(y, self.y_min), self.y_max),
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes.

    Degenerate (zero-area) boxes participate with IoU 0 rather than
    raising; a zero-area union also yields 0.
    """
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class RoiRegion:
    """Union of ground-truth boxes expanded by a margin and clipped to the image.

    Perturbation centers are constrained to lie inside this region;
    membership is boundary-inclusive.
    """

    boxes: tuple[BoundingBox, ...]
    margin: float

    def __bool__(self) -> bool:
        return bool(self.boxes)

    @property
    def is_empty(self) -> bool:
        return not self.boxes

    def contains(self, x: float, y: float) -> bool:
        return any(b.contains(x, y) for b in self.boxes)

    def nearest_point(self, x: float, y: float) -> tuple[float, float]:
        """Closest point of the closest box; ties go to the earliest box."""
        if not self.boxes:
            raise ValueError("cannot project onto an empty ROI")
        best = None
        best_d2 = math.inf
        for box in self.boxes:
            px, py = box.nearest_point(x, y)
            d2 = (px - x) ** 2 + (py - y) ** 2
            if d2 < best_d2:
                best = (px, py)
                best_d2 = d2
        return best

    def bounding_rectangle(self) -> BoundingBox:
        """Tight rectangle enclosing every ROI box (the search-space box for centers)."""
        if not self.boxes:
            raise ValueError("empty ROI has no bounding rectangle")
        return BoundingBox(
            min(b.x_min for b in self.boxes),
            min(b.y_min for b in self.boxes),
            max(b.x_max for b in self.boxes),
            max(b.y_max for b in self.boxes),
        )


def build_roi(
    annotations: Sequence,
    margin: float,
    image_size: tuple[int, int],
) -> RoiRegion:
    """Expand each ground-truth box by `margin` and clip to the image.

    `annotations` may be Annotation objects (anything with a `.box`) or
    bare BoundingBox instances.  Empty annotations produce an empty
    region; callers decide whether that is an error.
    """
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    w, h = image_size
    boxes = []
    for ann in annotations:
        box = getattr(ann, "box", ann)
        boxes.append(box.expand(margin).clip(w, h))
    return RoiRegion(boxes=tuple(boxes), margin=margin)


def roi_contains(roi: RoiRegion, point: tuple[float, float]) -> bool:
    """True iff the point lies inside at least one expanded box (boundary inclusive)."""
    x, y = point
    return roi.contains(x, y)
