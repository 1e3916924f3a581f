"""Bridge configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class BridgeConfig:
    """How to load and serve one detection model.

    `class_map` translates the model's class ids to the campaign's class
    list; empty means identity.  Detections whose class id is missing from
    a non-empty map are dropped (the map is expected to be total on the
    classes the model actually emits).
    """

    weights: str
    device: str = "cpu"
    confidence_threshold: float = 0.0
    arch: str = "ssdlite320_mobilenet_v3_large"
    class_map: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not Path(self.weights).exists():
            raise FileNotFoundError(f"weights file not found: {self.weights}")
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise ValueError("confidence_threshold must be in [0, 1]")


def parse_class_map(text: str) -> dict[int, int]:
    """Parse "model_id:campaign_id,model_id:campaign_id" pairs."""
    mapping: dict[int, int] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        model_id, _, campaign_id = part.partition(":")
        mapping[int(model_id)] = int(campaign_id)
    return mapping
