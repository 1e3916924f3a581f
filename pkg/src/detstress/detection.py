"""Prediction/annotation types, dataset ingestion, and box matching.

The ingestion format is one whitespace-separated text label file per image
with lines "class_id cx cy w h" (normalized center/size in [0, 1]); class
names are positional, i.e. index == class_id.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .geometry import BoundingBox, iou

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class DatasetFormatError(ValueError):
    """A label file line could not be parsed."""


@dataclass(frozen=True)
class Annotation:
    """One ground-truth labeled box."""

    class_id: int
    class_name: str
    box: BoundingBox


@dataclass(frozen=True)
class Detection:
    """One model prediction: class, confidence, box."""

    class_id: int
    confidence: float
    box: BoundingBox

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class DatasetItem:
    """An image plus its ground-truth annotations."""

    image_id: str
    image: np.ndarray  # (h, w, 3) uint8 RGB
    annotations: tuple[Annotation, ...]

    @property
    def image_size(self) -> tuple[int, int]:
        h, w = self.image.shape[:2]
        return (w, h)


@dataclass(frozen=True)
class Matching:
    """One-to-one assignment of predictions to ground-truth objects.

    `pred_index[i]` is the index into the prediction list assigned to
    ground truth i (None if unassigned) and `ious[i]` the corresponding
    overlap (0.0 if unassigned).
    """

    pred_index: tuple[Optional[int], ...]
    ious: tuple[float, ...]

    def assigned_pred_indices(self) -> set[int]:
        return {i for i in self.pred_index if i is not None}


def _denormalize_box(cx: float, cy: float, bw: float, bh: float,
                     width: int, height: int) -> BoundingBox:
    box = BoundingBox(
        (cx - bw / 2.0) * width,
        (cy - bh / 2.0) * height,
        (cx + bw / 2.0) * width,
        (cy + bh / 2.0) * height,
    )
    return box.clip(width, height)


def parse_label_file(path: Path, classes: Sequence[str],
                     image_size: tuple[int, int]) -> tuple[Annotation, ...]:
    """Parse one label file into denormalized pixel-coordinate annotations."""
    w, h = image_size
    annotations = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise DatasetFormatError(
                f"{path}:{lineno}: expected 5 fields 'class_id cx cy w h', "
                f"got {len(fields)}")
        try:
            class_id = int(fields[0])
            cx, cy, bw, bh = (float(f) for f in fields[1:])
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from None
        if not (0 <= class_id < len(classes)):
            raise DatasetFormatError(
                f"{path}:{lineno}: class_id {class_id} outside class list "
                f"of length {len(classes)}")
        annotations.append(Annotation(
            class_id=class_id,
            class_name=classes[class_id],
            box=_denormalize_box(cx, cy, bw, bh, w, h),
        ))
    return tuple(annotations)


def load_image(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def load_dataset(images_dir: str | Path, labels_dir: str | Path,
                 classes: Sequence[str]) -> list[DatasetItem]:
    """Load a dataset directory pair into items sorted by image id.

    A missing label file yields an item with empty annotations plus a
    logged warning; a malformed label line raises DatasetFormatError.
    """
    images_dir = Path(images_dir)
    labels_dir = Path(labels_dir)
    if not images_dir.is_dir():
        raise FileNotFoundError(f"images directory not found: {images_dir}")
    if not labels_dir.is_dir():
        raise FileNotFoundError(f"labels directory not found: {labels_dir}")
    items = []
    image_paths = sorted(
        (p for p in images_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.stem,
    )
    for img_path in image_paths:
        image = load_image(img_path)
        h, w = image.shape[:2]
        label_path = labels_dir / (img_path.stem + ".txt")
        if label_path.exists():
            annotations = parse_label_file(label_path, classes, (w, h))
        else:
            logger.warning("no label file for image %s; treating as unannotated",
                           img_path.stem)
            annotations = ()
        items.append(DatasetItem(image_id=img_path.stem, image=image,
                                 annotations=annotations))
    return items


def normalize_annotation(ann: Annotation, image_size: tuple[int, int]) -> str:
    """Inverse of the ingestion denormalization; used when writing label files."""
    w, h = image_size
    box = ann.box
    cx = (box.x_min + box.x_max) / 2.0 / w
    cy = (box.y_min + box.y_max) / 2.0 / h
    bw = box.width / w
    bh = box.height / h
    return f"{ann.class_id} {cx:.6f} {cy:.6f} {bw:.6f} {bh:.6f}"


def best_same_class_match(
    gt: Annotation, preds: Sequence[Detection],
) -> Optional[tuple[Detection, float]]:
    """Best same-class prediction by IoU; None when no same-class prediction exists.

    Ties are broken by higher confidence, then lower list index.
    """
    best = None
    best_key = None
    for idx, p in enumerate(preds):
        if p.class_id != gt.class_id:
            continue
        key = (iou(gt.box, p.box), p.confidence, -idx)
        if best_key is None or key > best_key:
            best = (p, key[0])
            best_key = key
    return best


def greedy_match(gts: Sequence[Annotation], preds: Sequence[Detection],
                 same_class_only: bool = False) -> Matching:
    """Greedy one-to-one assignment by descending IoU.

    Ground truths are processed in descending order of their best available
    IoU; each consumes its best remaining candidate, and a detection is
    never assigned twice.  Only overlapping (IoU > 0) pairs participate.
    """
    pairs = []
    for gi, gt in enumerate(gts):
        for pi, p in enumerate(preds):
            if same_class_only and p.class_id != gt.class_id:
                continue
            v = iou(gt.box, p.box)
            if v > 0.0:
                # Sort key mirrors best_same_class_match tie-breaking:
                # IoU, then higher confidence, then lower pred index, then
                # lower gt index.
                pairs.append((v, p.confidence, -pi, -gi, gi, pi))
    pairs.sort(reverse=True)
    assigned: dict[int, tuple[int, float]] = {}
    used_preds: set[int] = set()
    for v, _conf, _npi, _ngi, gi, pi in pairs:
        if gi in assigned or pi in used_preds:
            continue
        assigned[gi] = (pi, v)
        used_preds.add(pi)
    pred_index = tuple(assigned[i][0] if i in assigned else None
                       for i in range(len(gts)))
    ious = tuple(assigned[i][1] if i in assigned else 0.0
                 for i in range(len(gts)))
    return Matching(pred_index=pred_index, ious=ious)
