"""Primary-package client driving the real bridge server end to end.

These tests talk to the secondary component only through its command line
and the JSONL wire protocol, and are skipped when it is not installed (the
rest of the suite never needs it).
"""

import importlib.util
import json
import shlex
import sys

import numpy as np
import pytest

from detstress.campaign import CampaignConfig, run_campaign
from detstress.detectors import ExternalDetector
from detstress.scenes import items_from_scenes, make_random_scene_suite
from detstress.search import SearchConfig

pytestmark = pytest.mark.skipif(
    importlib.util.find_spec("detector_bridge") is None,
    reason="secondary component (detector-bridge) not installed")


@pytest.fixture
def bridge_command(tmp_path):
    params = tmp_path / "contrast.json"
    params.write_text(json.dumps({"background": 128, "contrast_threshold": 40,
                                  "min_component_area": 16}))
    return (f"{shlex.quote(sys.executable)} -m detector_bridge "
            f"--weights {shlex.quote(str(params))}")


def test_external_detector_against_real_bridge(bridge_command):
    image = np.full((64, 64, 3), 128, np.uint8)
    image[20:36, 20:44] = 40
    with ExternalDetector(bridge_command, timeout=60) as detector:
        detections = detector.detect(image)
    assert len(detections) == 1
    assert detections[0].class_id == 0
    assert detections[0].box.as_tuple() == (20, 20, 43, 35)


def test_small_campaign_through_bridge(bridge_command):
    items = items_from_scenes(make_random_scene_suite(n_scenes=1, seed=4))
    config = CampaignConfig(
        detector=f"external:{bridge_command}",
        search=SearchConfig(population_size=4, generations=2, runs=1, seed=2),
        seed=2, detector_timeout=60)
    report = run_campaign(config, items=items)
    assert report.detector_calls["nsga2"] == 8
    assert report.detector_calls["random"] == 8
    assert len(report.candidate_rows) == len(report.archive_rows) > 0
