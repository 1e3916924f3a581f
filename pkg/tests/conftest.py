import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    try:
        from test_acceptance import CRITERION_RESULTS
    except ImportError:
        return
    if not CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in CRITERION_RESULTS:
        terminalreporter.write_line(f"[ACCEPTANCE] {status} {name}")

from detstress.detection import Annotation, Detection
from detstress.detectors import DiskSpec, SyntheticSceneSpec, render_synthetic_scene
from detstress.geometry import BoundingBox


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_annotation(x_min, y_min, x_max, y_max, class_id=0, class_name="screw"):
    return Annotation(class_id=class_id, class_name=class_name,
                      box=BoundingBox(x_min, y_min, x_max, y_max))


def make_detection(x_min, y_min, x_max, y_max, class_id=0, confidence=0.9):
    return Detection(class_id=class_id, confidence=confidence,
                     box=BoundingBox(x_min, y_min, x_max, y_max))


def single_disk_scene(class_id=1, fill=170, radius=12, center=(64, 64),
                      size=128):
    spec = SyntheticSceneSpec(
        width=size, height=size,
        objects=(DiskSpec(class_id=class_id, center=center, radius=radius,
                          fill=fill),))
    return render_synthetic_scene(spec)


def random_boxes_instance(rng, n_gts, n_preds, classes=(0, 1), extent=100.0):
    """Fully random boxes (used only for one-to-one assertions)."""
    def rand_box():
        x, y = rng.uniform(0, extent - 20, 2)
        w, h = rng.uniform(4, 30, 2)
        return BoundingBox(x, y, min(x + w, extent), min(y + h, extent))

    gts = [Annotation(int(rng.integers(len(classes))), "c", rand_box())
           for _ in range(n_gts)]
    preds = [Detection(int(rng.integers(len(classes))),
                       float(rng.uniform(0.3, 1.0)), rand_box())
             for _ in range(n_preds)]
    return gts, preds


def anchored_instance(rng, n_gts=None, max_preds=3, jitter=12.0, extent=60.0):
    """Detector-realistic instance: predictions jittered around separated gts.

    Sites are spaced so a prediction can only overlap its own ground truth,
    which makes the matching graph a union of stars.
    """
    if n_gts is None:
        n_gts = int(rng.integers(1, 4))
    gts = []
    preds = []
    budget = max_preds
    for i in range(n_gts):
        ax = 40.0 + 90.0 * i
        ay = 40.0
        w, h = rng.uniform(16, 30, 2)
        gts.append(Annotation(int(rng.integers(2)), "c",
                              BoundingBox(ax, ay, ax + w, ay + h)))
    for gi, gt in enumerate(gts):
        k = int(rng.integers(0, 3))
        for _ in range(min(k, budget)):
            dx, dy = rng.uniform(-jitter, jitter, 2)
            dw, dh = rng.uniform(-6, 6, 2)
            b = gt.box
            box = BoundingBox(b.x_min + dx, b.y_min + dy,
                              max(b.x_min + dx + 3, b.x_max + dx + dw),
                              max(b.y_min + dy + 3, b.y_max + dy + dh))
            preds.append(Detection(int(rng.integers(2)),
                                   float(rng.uniform(0.3, 1.0)), box))
            budget -= 1
    return gts, preds[:max_preds]
