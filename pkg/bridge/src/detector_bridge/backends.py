"""Model backends: torchvision detection models and a self-contained
contrast detector for fixtures and smoke runs.

A backend takes an RGB uint8 array and returns a list of
(class_id, confidence, (x_min, y_min, x_max, y_max)) tuples in pixel
coordinates.  The backend is chosen by the weights file: a ``.json`` file
configures the contrast backend, anything else is loaded as a torchvision
state dict for the configured architecture.
"""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path

import numpy as np

from .config import BridgeConfig

Detection = tuple[int, float, tuple[float, float, float, float]]


class ContrastBackend:
    """Threshold-and-components detector driven by a JSON parameter file.

    Pixels darker/brighter than the background by more than the threshold
    form 4-connected components per polarity; components above the minimum
    area become detections (class 0 dark, 1 bright).
    """

    def __init__(self, params: dict):
        self.background = int(params.get("background", 128))
        self.threshold = int(params.get("contrast_threshold", 40))
        self.min_area = int(params.get("min_component_area", 16))

    def __call__(self, image: np.ndarray) -> list[Detection]:
        gray = (2 * image.astype(np.int32).sum(axis=2) + 3) // 6
        contrast = gray - self.background
        detections: list[Detection] = []
        for class_id, mask in ((0, contrast < -self.threshold),
                               (1, contrast > self.threshold)):
            detections.extend(
                (class_id, conf, box)
                for conf, box in self._components(mask, np.abs(contrast)))
        return detections

    def _components(self, mask: np.ndarray, abs_contrast: np.ndarray):
        h, w = mask.shape
        seen = np.zeros_like(mask, dtype=bool)
        for sy, sx in zip(*np.nonzero(mask)):
            if seen[sy, sx]:
                continue
            queue = deque([(int(sy), int(sx))])
            seen[sy, sx] = True
            pixels = []
            while queue:
                y, x = queue.popleft()
                pixels.append((y, x))
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] \
                            and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            if len(pixels) < self.min_area:
                continue
            ys = [p[0] for p in pixels]
            xs = [p[1] for p in pixels]
            conf = min(1.0, float(np.mean(
                [abs_contrast[y, x] for y, x in pixels])) / 128.0)
            yield conf, (float(min(xs)), float(min(ys)),
                         float(max(xs)), float(max(ys)))


class TorchvisionBackend:
    """A torchvision detection model restored from a state-dict file."""

    def __init__(self, config: BridgeConfig):
        import torch
        import torchvision

        builder = getattr(torchvision.models.detection, config.arch, None)
        if builder is None:
            raise ValueError(f"unknown torchvision detection arch "
                             f"{config.arch!r}")
        # the state dict supplies every parameter, so no pretrained parts
        self.model = builder(weights=None, weights_backbone=None)
        state = torch.load(config.weights, map_location=config.device,
                           weights_only=True)
        self.model.load_state_dict(state)
        self.model.eval()
        self.device = torch.device(config.device)
        self.model.to(self.device)
        self.score_threshold = config.confidence_threshold
        self._torch = torch

    def __call__(self, image: np.ndarray) -> list[Detection]:
        torch = self._torch
        tensor = torch.from_numpy(image.copy()).permute(2, 0, 1).float() / 255.0
        with torch.no_grad():
            output = self.model([tensor.to(self.device)])[0]
        detections: list[Detection] = []
        for box, label, score in zip(output["boxes"].cpu().numpy(),
                                     output["labels"].cpu().numpy(),
                                     output["scores"].cpu().numpy()):
            if score < self.score_threshold:
                continue
            x0, y0, x1, y1 = (float(v) for v in box)
            detections.append((int(label), float(score),
                               (min(x0, x1), min(y0, y1),
                                max(x0, x1), max(y0, y1))))
        return detections


def load_backend(config: BridgeConfig):
    path = Path(config.weights)
    if path.suffix == ".json":
        params = json.loads(path.read_text())
        return ContrastBackend(params)
    return TorchvisionBackend(config)


def apply_class_map(detections: list[Detection],
                    class_map: dict[int, int]) -> list[Detection]:
    if not class_map:
        return detections
    return [(class_map[cid], conf, box) for cid, conf, box in detections
            if cid in class_map]
