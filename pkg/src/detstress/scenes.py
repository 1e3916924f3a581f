"""Synthetic scene suites: random generation, JSON specs, dataset export.

A scene spec file is JSON:

    {"classes": ["screw", "noscrew"],
     "scenes": [{"id": "scene_000", "width": 128, "height": 128,
                 "background": 128,
                 "detector": {"contrast_threshold": 40,
                              "min_component_area": 16},
                 "objects": [{"class_id": 0, "center": [40, 40],
                              "radius": 12, "fill": 82}]}]}

Exported datasets use the ingestion format: images/<id>.png plus
labels/<id>.txt with normalized "class_id cx cy w h" lines and a
classes.txt file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .detection import DatasetItem, normalize_annotation
from .detectors import (
    DEFAULT_CLASS_NAMES,
    DiskSpec,
    SyntheticDetectorParams,
    SyntheticSceneSpec,
    render_synthetic_scene,
)


@dataclass(frozen=True)
class NamedScene:
    scene_id: str
    spec: SyntheticSceneSpec


def make_random_scene_suite(
    n_scenes: int = 10,
    seed: int = 0,
    *,
    width: int = 128,
    height: int = 128,
    min_disks: int = 2,
    max_disks: int = 4,
    radius_range: tuple[float, float] = (10.0, 15.0),
    contrast_range: tuple[int, int] = (44, 56),
    class_names: Sequence[str] = DEFAULT_CLASS_NAMES,
) -> list[NamedScene]:
    """Generate non-overlapping disk scenes with mixed dark/bright objects.

    Contrasts stay above the detector threshold (clean scenes are fully
    detected, confidence >= contrast/128 >= 0.34) but low enough that
    bounded perturbations can erode or erase objects.
    """
    rng = np.random.default_rng(seed)
    background = 128
    scenes = []
    for si in range(n_scenes):
        n_disks = int(rng.integers(min_disks, max_disks + 1))
        disks: list[DiskSpec] = []
        attempts = 0
        while len(disks) < n_disks and attempts < 200:
            attempts += 1
            radius = float(np.round(rng.uniform(*radius_range)))
            cx = float(np.round(rng.uniform(radius + 2, width - radius - 3)))
            cy = float(np.round(rng.uniform(radius + 2, height - radius - 3)))
            if any(math.hypot(cx - d.center[0], cy - d.center[1])
                   < radius + d.radius + 4 for d in disks):
                continue
            contrast = int(rng.integers(contrast_range[0], contrast_range[1] + 1))
            dark = bool(rng.integers(2))
            fill = background - contrast if dark else background + contrast
            class_id = 0 if dark else 1
            disks.append(DiskSpec(class_id=class_id, center=(cx, cy),
                                  radius=radius, fill=fill))
        spec = SyntheticSceneSpec(width=width, height=height,
                                  objects=tuple(disks), background=background,
                                  class_names=tuple(class_names))
        scenes.append(NamedScene(scene_id=f"scene_{si:03d}", spec=spec))
    return scenes


def items_from_scenes(scenes: Sequence[NamedScene]) -> list[DatasetItem]:
    items = []
    for scene in scenes:
        image, annotations = render_synthetic_scene(scene.spec)
        items.append(DatasetItem(image_id=scene.scene_id, image=image,
                                 annotations=annotations))
    return sorted(items, key=lambda it: it.image_id)


def scene_to_dict(scene: NamedScene) -> dict:
    spec = scene.spec
    return {
        "id": scene.scene_id,
        "width": spec.width,
        "height": spec.height,
        "background": spec.background,
        "detector": {
            "contrast_threshold": spec.detector.contrast_threshold,
            "min_component_area": spec.detector.min_component_area,
        },
        "objects": [
            {"class_id": o.class_id, "center": list(o.center),
             "radius": o.radius, "fill": o.fill}
            for o in spec.objects
        ],
    }


def scene_from_dict(data: dict, class_names: Sequence[str]) -> NamedScene:
    det = data.get("detector", {})
    params = SyntheticDetectorParams(
        background=data.get("background", 128),
        contrast_threshold=det.get("contrast_threshold", 40),
        min_component_area=det.get("min_component_area", 16),
    )
    objects = tuple(
        DiskSpec(class_id=o["class_id"], center=tuple(o["center"]),
                 radius=o["radius"], fill=o["fill"])
        for o in data["objects"]
    )
    spec = SyntheticSceneSpec(width=data["width"], height=data["height"],
                              objects=objects, background=data.get("background", 128),
                              detector=params, class_names=tuple(class_names))
    return NamedScene(scene_id=data["id"], spec=spec)


def save_scene_suite(scenes: Sequence[NamedScene], path: str | Path,
                     class_names: Sequence[str] = DEFAULT_CLASS_NAMES) -> None:
    payload = {"classes": list(class_names),
               "scenes": [scene_to_dict(s) for s in scenes]}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_scene_suite(path: str | Path) -> tuple[list[NamedScene], list[str]]:
    data = json.loads(Path(path).read_text())
    classes = data.get("classes", list(DEFAULT_CLASS_NAMES))
    scenes = [scene_from_dict(s, classes) for s in data["scenes"]]
    return scenes, classes


def write_synthetic_dataset(scenes: Sequence[NamedScene], outdir: str | Path,
                            class_names: Sequence[str] = DEFAULT_CLASS_NAMES) -> None:
    """Export scenes in the ingestion format (images/, labels/, classes.txt)."""
    outdir = Path(outdir)
    images_dir = outdir / "images"
    labels_dir = outdir / "labels"
    images_dir.mkdir(parents=True, exist_ok=True)
    labels_dir.mkdir(parents=True, exist_ok=True)
    for scene in scenes:
        image, annotations = render_synthetic_scene(scene.spec)
        Image.fromarray(image, mode="RGB").save(images_dir / f"{scene.scene_id}.png")
        size = (scene.spec.width, scene.spec.height)
        lines = [normalize_annotation(a, size) for a in annotations]
        (labels_dir / f"{scene.scene_id}.txt").write_text(
            "\n".join(lines) + ("\n" if lines else ""))
    (outdir / "classes.txt").write_text("\n".join(class_names) + "\n")
