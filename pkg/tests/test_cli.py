import json

import pytest

import detstress as ds
from detstress.cli import main


@pytest.fixture
def dataset_dir(tmp_path):
    scenes = ds.make_random_scene_suite(n_scenes=2, seed=5)
    suite_path = tmp_path / "suite.json"
    ds.save_scene_suite(scenes, suite_path)
    data_dir = tmp_path / "data"
    rc = main(["synth", "--scene-spec", str(suite_path), "--out", str(data_dir)])
    assert rc == 0
    return data_dir


class TestSynth:
    def test_writes_dataset_layout(self, dataset_dir):
        assert (dataset_dir / "images" / "scene_000.png").exists()
        assert (dataset_dir / "labels" / "scene_000.txt").exists()
        classes = (dataset_dir / "classes.txt").read_text().split()
        assert classes == ["screw", "noscrew"]

    def test_labels_round_trip_through_loader(self, dataset_dir):
        items = ds.load_dataset(dataset_dir / "images", dataset_dir / "labels",
                                ["screw", "noscrew"])
        assert len(items) == 2
        assert all(it.annotations for it in items)
        # annotation boxes agree with the rendered scenes within CSV precision
        scenes = ds.items_from_scenes(ds.make_random_scene_suite(n_scenes=2,
                                                                 seed=5))
        for loaded, rendered in zip(items, scenes):
            for a, b in zip(loaded.annotations, rendered.annotations):
                assert a.class_id == b.class_id
                assert a.box.as_tuple() == pytest.approx(b.box.as_tuple(),
                                                         abs=1e-3)


class TestRunAnalyzeReplay:
    def test_full_cli_workflow(self, dataset_dir, tmp_path):
        out_dir = tmp_path / "out"
        rc = main([
            "run",
            "--dataset", str(dataset_dir / "images"),
            "--labels", str(dataset_dir / "labels"),
            "--classes", str(dataset_dir / "classes.txt"),
            "--detector", "synthetic",
            "--pop", "4", "--gens", "2", "--runs", "1",
            "--seed", "11", "--out", str(out_dir),
        ])
        assert rc == 0
        for name in ("candidates.csv", "archives.csv", "failures.csv",
                     "stability.csv", "summary.json", "transferability.json",
                     "manifest.json"):
            assert (out_dir / name).exists(), name
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["detector_calls"]["nsga2"] \
            == manifest["detector_calls"]["random"] == 2 * 8

        rc = main(["analyze", "--out", str(out_dir)])
        assert rc == 0
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["source"] == "analyze"

        replay_dir = tmp_path / "replay"
        rc = main([
            "replay",
            "--dataset", str(dataset_dir / "images"),
            "--labels", str(dataset_dir / "labels"),
            "--classes", str(dataset_dir / "classes.txt"),
            "--archives", f"mainrun={out_dir / 'archives.csv'}",
            "--detector-target", "tdet40=synthetic",
            "--detector-target", "tdet30=synthetic:tdet=30",
            "--out", str(replay_dir),
        ])
        assert rc == 0
        matrix = json.loads((replay_dir / "transferability.json").read_text())
        assert set(matrix["targets"]) == {"tdet40", "tdet30"}
        assert set(matrix["targets"]["tdet40"]) == {"mainrun"}

    def test_run_requires_out(self, dataset_dir):
        rc = main([
            "run",
            "--dataset", str(dataset_dir / "images"),
            "--labels", str(dataset_dir / "labels"),
            "--pop", "4", "--gens", "1", "--runs", "1",
        ])
        assert rc == 2

    def test_config_file_with_flag_overrides(self, dataset_dir, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({
            "images_dir": str(dataset_dir / "images"),
            "labels_dir": str(dataset_dir / "labels"),
            "classes": ["screw", "noscrew"],
            "detector": "synthetic",
            "seed": 4,
            "search": {"population_size": 4, "generations": 2, "runs": 1},
            "thresholds": {"conf_floor": 0.25},
        }))
        out_dir = tmp_path / "out"
        rc = main(["run", "--config", str(config_path),
                   "--gens", "1", "--out", str(out_dir)])
        assert rc == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["config"]["search"]["generations"] == 1  # flag wins
        assert manifest["config"]["search"]["population_size"] == 4
