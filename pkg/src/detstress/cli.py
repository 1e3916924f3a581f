"""Command-line interface: run, replay, synth, analyze.

A JSON config file may supply any CampaignConfig field; flags override the
file.  Detector specs are "synthetic", "synthetic:tdet=30,min_area=16",
or "external:<bridge command>".
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .campaign import (
    CampaignConfig,
    run_campaign,
    transferability_matrix,
)
from .detection import load_dataset
from .detectors import build_detector
from .failures import FailureThresholds, StabilityThresholds
from .reporting import analyze, emit_reports, load_archive_rows
from .scenes import load_scene_suite, write_synthetic_dataset
from .search import SearchConfig


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file of CampaignConfig fields")
    parser.add_argument("--dataset", help="images directory")
    parser.add_argument("--labels", help="label-files directory")
    parser.add_argument("--classes", help="comma-separated class names "
                                          "(or a classes.txt path)")
    parser.add_argument("--detector", help="detector spec "
                                           "(synthetic | external:<command>)")
    parser.add_argument("--pop", type=int, help="population size")
    parser.add_argument("--gens", type=int, help="generations")
    parser.add_argument("--runs", type=int, help="independent runs")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--workers", type=int, help="parallel task workers")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--conf-floor", type=float,
                        help="minimum reported confidence")
    parser.add_argument("--tau-loc", type=float,
                        help="IoU threshold for acceptable localization")
    parser.add_argument("--tau-detect", type=float,
                        help="IoU threshold for any detection")
    parser.add_argument("--hv-ref", help="hypervolume reference, e.g. 1,1,1")


def _parse_classes(value: str) -> tuple[str, ...]:
    path = Path(value)
    if path.exists():
        return tuple(line.strip() for line in path.read_text().splitlines()
                     if line.strip())
    return tuple(c.strip() for c in value.split(",") if c.strip())


def build_config(args: argparse.Namespace) -> CampaignConfig:
    data: dict = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    search_data = data.get("search", {})
    thresholds_data = data.get("thresholds", {})
    stability_data = data.get("stability", {})
    bounds_data = data.get("bounds", {})

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return data.get(key, default)

    search = SearchConfig(
        population_size=args.pop if args.pop is not None
        else search_data.get("population_size", 40),
        generations=args.gens if args.gens is not None
        else search_data.get("generations", 500),
        runs=args.runs if args.runs is not None else search_data.get("runs", 10),
        seed=pick(args.seed, "seed", 0),
    )
    thresholds = FailureThresholds(
        tau_detect=args.tau_detect if args.tau_detect is not None
        else thresholds_data.get("tau_detect", 0.1),
        tau_loc=args.tau_loc if args.tau_loc is not None
        else thresholds_data.get("tau_loc", 0.5),
        tau_dup=thresholds_data.get("tau_dup", 0.5),
        conf_floor=args.conf_floor if args.conf_floor is not None
        else thresholds_data.get("conf_floor", 0.25),
    )
    stability = StabilityThresholds(
        minor_max=stability_data.get("minor_max", 0.01),
        small_max=stability_data.get("small_max", 0.05),
        moderate_max=stability_data.get("moderate_max", 0.10),
    )
    classes = (_parse_classes(args.classes) if args.classes
               else tuple(data.get("classes", ("screw", "noscrew"))))
    hv_ref = (tuple(float(v) for v in args.hv_ref.split(","))
              if args.hv_ref else tuple(data.get("hv_reference", (1.0, 1.0, 1.0))))
    return CampaignConfig(
        classes=classes,
        detector=pick(args.detector, "detector", "synthetic"),
        images_dir=pick(args.dataset, "images_dir", None),
        labels_dir=pick(args.labels, "labels_dir", None),
        out_dir=pick(args.out, "out_dir", None),
        seed=pick(args.seed, "seed", 0),
        search=search,
        thresholds=thresholds,
        stability=stability,
        roi_margin=data.get("roi_margin", 5.0),
        r_min=bounds_data.get("r_min", 8.0),
        r_max=bounds_data.get("r_max", 80.0),
        alpha_min=bounds_data.get("alpha_min", 0.15),
        alpha_max=bounds_data.get("alpha_max", 0.80),
        delta_abs_max=bounds_data.get("delta_abs_max", 48.0),
        hv_reference=hv_ref,
        workers=pick(args.workers, "workers", 1),
        algorithms=tuple(data.get("algorithms", ("nsga2", "random"))),
        classify_all_random=data.get("classify_all_random", False),
    )


def cmd_run(args: argparse.Namespace) -> int:
    config = build_config(args)
    if not config.out_dir:
        print("error: --out (or out_dir in the config) is required",
              file=sys.stderr)
        return 2
    report = run_campaign(config)
    emit_reports(report, config.out_dir)
    comparison = report.summary.get("comparison") or {}
    for alg, block in sorted(report.summary["algorithms"].items()):
        print(f"{alg}: candidates={block['candidates']} "
              f"failure_rate={block['failure_rate']:.4f} "
              f"hv_mean={block['hv_mean']:.4f}")
    hv_block = comparison.get("hypervolume")
    if hv_block:
        print(f"hypervolume comparison: p={hv_block['p_value']:.4g} "
              f"r_rb={hv_block['effect_rank_biserial']:.4f} "
              f"({hv_block['effect_label']})")
    print(f"reports written to {config.out_dir}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    config = build_config(args)
    if not config.images_dir or not config.labels_dir:
        print("error: --dataset and --labels are required", file=sys.stderr)
        return 2
    if not args.out:
        print("error: --out is required", file=sys.stderr)
        return 2
    archives = {}
    for spec in args.archives:
        name, _, path = spec.partition("=")
        if not path:
            print(f"error: --archives needs NAME=PATH, got {spec!r}",
                  file=sys.stderr)
            return 2
        archives[name] = load_archive_rows(path)
    detectors = {}
    for spec in args.detectors:
        name, _, det_spec = spec.partition("=")
        if not det_spec:
            print(f"error: --detector needs NAME=SPEC, got {spec!r}",
                  file=sys.stderr)
            return 2
        detectors[name] = build_detector(det_spec)
    items = load_dataset(config.images_dir, config.labels_dir, config.classes)
    result = transferability_matrix(archives, detectors,
                                    [it for it in items if it.annotations],
                                    config.thresholds)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = result.to_json_dict()
    (outdir / "transferability.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for target, sources in sorted(result.rates.items()):
        for source, rate in sorted(sources.items()):
            print(f"target={target} source={source} failure_rate={rate:.4f}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    scenes, classes = load_scene_suite(args.scene_spec)
    write_synthetic_dataset(scenes, args.out, classes)
    print(f"wrote {len(scenes)} scenes to {args.out}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    hv_ref = (tuple(float(v) for v in args.hv_ref.split(","))
              if args.hv_ref else (1.0, 1.0, 1.0))
    summary = analyze(args.out, hv_ref)
    for alg, block in sorted(summary["algorithms"].items()):
        print(f"{alg}: candidates={block['candidates']} "
              f"failure_rate={block['failure_rate']:.4f} "
              f"hv_mean={block['hv_mean']:.4f}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="detstress",
        description="Search-based robustness testing of object detectors")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a full campaign")
    _add_common_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_replay = sub.add_parser("replay",
                              help="replay archives across detectors "
                                   "(transferability matrix)")
    _add_common_flags(p_replay)
    p_replay.add_argument("--archives", action="append", default=[],
                          metavar="NAME=CSV", required=True,
                          help="source archive CSV (repeatable)")
    p_replay.add_argument("--detector-target", dest="detectors",
                          action="append", default=[], metavar="NAME=SPEC",
                          required=True,
                          help="named target detector (repeatable)")
    p_replay.set_defaults(func=cmd_replay)

    p_synth = sub.add_parser("synth",
                             help="generate a synthetic dataset from a "
                                  "scene spec file")
    p_synth.add_argument("--scene-spec", required=True,
                         help="scene suite JSON file")
    p_synth.add_argument("--out", required=True, help="dataset output directory")
    p_synth.set_defaults(func=cmd_synth)

    p_analyze = sub.add_parser("analyze",
                               help="recompute summary statistics from "
                                    "emitted CSVs")
    p_analyze.add_argument("--out", required=True,
                           help="directory holding the campaign CSVs")
    p_analyze.add_argument("--hv-ref", help="hypervolume reference, e.g. 1,1,1")
    p_analyze.set_defaults(func=cmd_analyze)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
