"""Campaign orchestration: images x runs x algorithms, aggregation, replay.

A campaign runs both search algorithms on every annotated image for a
fixed number of independent runs (run seeds are master_seed + run_index),
classifies every archived candidate's failures on its perturbed image,
computes stability deviations for the non-failing ones, and aggregates
hypervolume, failure-rate, and perturbation-magnitude comparisons.
"""

from __future__ import annotations

import concurrent.futures
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .detection import DatasetItem, Detection, load_dataset
from .detectors import Detector, build_detector
from .failures import (
    FAILURE_TYPES,
    FailureRecord,
    FailureThresholds,
    StabilityThresholds,
    categorize_stability,
    classify_failures,
    failure_occurrences,
    failure_rate,
    is_violation,
    stability_deviation,
)
from .geometry import build_roi
from .objectives import ObjectiveVector, conf_filter
from .perturbation import GenomeBounds, PerturbationGenome, apply_perturbation
from .search import (
    ParetoArchive,
    SearchConfig,
    nsga2_run,
    random_search_run,
)
from .stats import (
    DEFAULT_REFERENCE,
    hypervolume,
    mann_whitney_u,
    wilcoxon_signed_rank,
)

logger = logging.getLogger(__name__)

ALGORITHMS = ("nsga2", "random")


class CampaignError(RuntimeError):
    pass


@dataclass(frozen=True)
class CampaignConfig:
    """Everything a campaign needs; all fields have reproducible defaults."""

    classes: tuple[str, ...] = ("screw", "noscrew")
    detector: str = "synthetic"
    images_dir: Optional[str] = None
    labels_dir: Optional[str] = None
    out_dir: Optional[str] = None
    seed: int = 0
    search: SearchConfig = field(default_factory=SearchConfig)
    thresholds: FailureThresholds = field(default_factory=FailureThresholds)
    stability: StabilityThresholds = field(default_factory=StabilityThresholds)
    roi_margin: float = 5.0
    r_min: float = 8.0
    r_max: float = 80.0
    alpha_min: float = 0.15
    alpha_max: float = 0.80
    delta_abs_max: float = 48.0
    hv_reference: tuple[float, float, float] = DEFAULT_REFERENCE
    workers: int = 1
    algorithms: tuple[str, ...] = ALGORITHMS
    classify_all_random: bool = False
    detector_timeout: float = 30.0

    def __post_init__(self):
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {alg!r}")

    def run_seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.search.runs)]

    def bounds_for(self, item: DatasetItem) -> GenomeBounds:
        roi = build_roi(item.annotations, self.roi_margin, item.image_size)
        return GenomeBounds(roi=roi, r_min=self.r_min, r_max=self.r_max,
                            alpha_min=self.alpha_min, alpha_max=self.alpha_max,
                            delta_abs_max=self.delta_abs_max)

    def to_json_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "detector": self.detector,
            "images_dir": self.images_dir,
            "labels_dir": self.labels_dir,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "search": {
                "population_size": self.search.population_size,
                "generations": self.search.generations,
                "runs": self.search.runs,
                "seed": self.search.seed,
            },
            "thresholds": {
                "tau_detect": self.thresholds.tau_detect,
                "tau_loc": self.thresholds.tau_loc,
                "tau_dup": self.thresholds.tau_dup,
                "conf_floor": self.thresholds.conf_floor,
            },
            "stability": {
                "minor_max": self.stability.minor_max,
                "small_max": self.stability.small_max,
                "moderate_max": self.stability.moderate_max,
            },
            "roi_margin": self.roi_margin,
            "bounds": {
                "r_min": self.r_min, "r_max": self.r_max,
                "alpha_min": self.alpha_min, "alpha_max": self.alpha_max,
                "delta_abs_max": self.delta_abs_max,
            },
            "hv_reference": list(self.hv_reference),
            "workers": self.workers,
            "algorithms": list(self.algorithms),
            "classify_all_random": self.classify_all_random,
        }


@dataclass(frozen=True)
class StabilityRow:
    delta_conf: float
    delta_loc: float
    category_conf: str
    category_loc: str

    @property
    def violation(self) -> bool:
        return is_violation(self.category_conf) or is_violation(self.category_loc)


@dataclass(frozen=True)
class CandidateRow:
    """One archived (or, under the opt-in flag, evaluated) candidate's record."""

    image_id: str
    run_id: int
    algorithm: str
    evaluation_index: int
    genome: PerturbationGenome
    objectives: ObjectiveVector
    failure: FailureRecord
    stability: Optional[StabilityRow]  # None for failing candidates


@dataclass(frozen=True)
class ArchiveRow:
    """The replay wire format: ids plus genome plus objectives."""

    image_id: str
    run_id: int
    algorithm: str
    evaluation_index: int
    genome: PerturbationGenome
    objectives: ObjectiveVector


@dataclass
class CampaignReport:
    config: CampaignConfig
    candidate_rows: list[CandidateRow]
    archive_rows: list[ArchiveRow]
    hv_rows: list[tuple[str, int, str, float]]  # image_id, run_id, algorithm, hv
    detector_calls: dict[str, int]  # per algorithm plus "baseline"
    run_seeds: list[int]
    skipped_images: list[str]
    errors: list[str]
    summary: dict
    transferability: dict


@dataclass(frozen=True)
class _TaskSpec:
    item: DatasetItem
    clean_preds: tuple[Detection, ...]
    run_index: int
    run_seed: int
    algorithm: str
    config: CampaignConfig


@dataclass
class _TaskResult:
    image_id: str
    run_index: int
    algorithm: str
    rows: list[CandidateRow]
    archive_rows: list[ArchiveRow]
    hv: float
    detector_calls: int
    errors: list[str]


class _CountingDetector(Detector):
    """Wraps a detector to count calls (budget-parity accounting)."""

    def __init__(self, inner: Detector):
        self.inner = inner
        self.tag = inner.tag
        self.deterministic = inner.deterministic
        self.concurrency_safe = inner.concurrency_safe
        self.calls = 0

    def _run(self, image):
        self.calls += 1
        return self.inner._run(image)


def candidate_to_row(item: DatasetItem, cand, archive: ParetoArchive,
                     clean_preds: Sequence[Detection],
                     config: CampaignConfig) -> CandidateRow:
    record = classify_failures(item.annotations, cand.predictions,
                               config.thresholds)
    stability = None
    if not record.failed:
        dev = stability_deviation(clean_preds, cand.predictions, item.annotations)
        stability = StabilityRow(
            delta_conf=dev.delta_conf,
            delta_loc=dev.delta_loc,
            category_conf=categorize_stability(dev.delta_conf, config.stability),
            category_loc=categorize_stability(dev.delta_loc, config.stability),
        )
    return CandidateRow(
        image_id=item.image_id,
        run_id=archive.run_id,
        algorithm=archive.algorithm,
        evaluation_index=cand.evaluation_index,
        genome=cand.genome,
        objectives=cand.objectives,
        failure=record,
        stability=stability,
    )


def _run_task(task: _TaskSpec) -> _TaskResult:
    config = task.config
    item = task.item
    detector = _CountingDetector(build_detector(config.detector,
                                                timeout=config.detector_timeout))
    bounds = config.bounds_for(item)
    errors: list[str] = []
    collect_all: Optional[list] = None
    if task.algorithm == "nsga2":
        archive = nsga2_run(item, bounds, detector, config.search, task.run_seed,
                            conf_floor=config.thresholds.conf_floor,
                            run_id=task.run_index)
    else:
        if config.classify_all_random:
            collect_all = []
        archive = random_search_run(item, bounds, detector, config.search,
                                    task.run_seed,
                                    conf_floor=config.thresholds.conf_floor,
                                    run_id=task.run_index,
                                    collect_all=collect_all)
    classified = list(archive.candidates) if collect_all is None else [
        c for c in collect_all if c.valid]
    rows = [candidate_to_row(item, cand, archive, task.clean_preds, config)
            for cand in classified]
    errors.extend(
        f"{item.image_id} run {task.run_index} {task.algorithm} "
        f"eval {c.evaluation_index}: {c.error}"
        for c in (collect_all or archive.candidates) if not c.valid)
    hv = hypervolume(archive.objective_points(), config.hv_reference)
    archive_rows = [
        ArchiveRow(image_id=item.image_id, run_id=archive.run_id,
                   algorithm=archive.algorithm,
                   evaluation_index=c.evaluation_index,
                   genome=c.genome, objectives=c.objectives)
        for c in archive.candidates
    ]
    if hasattr(detector.inner, "close"):
        detector.inner.close()
    return _TaskResult(image_id=item.image_id, run_index=task.run_index,
                       algorithm=task.algorithm, rows=rows,
                       archive_rows=archive_rows, hv=hv,
                       detector_calls=detector.calls, errors=errors)


def _stability_histogram(rows: Sequence[CandidateRow]) -> dict:
    non_failing = [r.stability for r in rows if r.stability is not None]
    out = {"non_failing": len(non_failing)}
    for kind, attr in (("confidence", "category_conf"),
                       ("localization", "category_loc")):
        counts = {c: 0 for c in ("minor", "small", "moderate", "large")}
        for s in non_failing:
            counts[getattr(s, attr)] += 1
        total = max(len(non_failing), 1)
        out[kind] = {c: {"count": n, "fraction": n / total}
                     for c, n in counts.items()}
        out[f"{kind}_violations"] = sum(
            counts[c] for c in ("moderate", "large")) / total
    return out


def _build_summary(config: CampaignConfig, rows: list[CandidateRow],
                   hv_rows: list[tuple[str, int, str, float]],
                   n_images: int) -> dict:
    summary: dict = {"images": n_images, "runs": config.search.runs,
                     "algorithms": {}, "stability": {}}
    by_alg: dict[str, list[CandidateRow]] = {a: [] for a in config.algorithms}
    for row in rows:
        by_alg[row.algorithm].append(row)
    hv_by_key: dict[tuple[str, int, str], float] = {
        (img, run, alg): hv for img, run, alg, hv in hv_rows}
    for alg, alg_rows in by_alg.items():
        records = [r.failure for r in alg_rows]
        failing = [r for r in alg_rows if r.failure.failed]
        hvs = [hv for (_, _, a, hv) in hv_rows if a == alg]
        mags = [r.objectives.f3 for r in failing]
        summary["algorithms"][alg] = {
            "candidates": len(alg_rows),
            "failing": len(failing),
            "failure_rate": failure_rate(records) if records else 0.0,
            "failure_occurrences": {
                t: failure_occurrences(records, t) for t in FAILURE_TYPES},
            "hv_mean": float(np.mean(hvs)) if hvs else 0.0,
            "magnitude_failing_mean": float(np.mean(mags)) if mags else None,
            "magnitude_failing_median": float(np.median(mags)) if mags else None,
        }
        summary["stability"][alg] = _stability_histogram(alg_rows)
    if {"nsga2", "random"} <= set(config.algorithms):
        summary["comparison"] = _comparison_block(config, by_alg, hv_by_key)
    return summary


def _comparison_block(config: CampaignConfig,
                      by_alg: dict[str, list[CandidateRow]],
                      hv_by_key: dict[tuple[str, int, str], float]) -> dict:
    keys = sorted({(img, run) for (img, run, _alg) in hv_by_key})
    hv_pairs = []
    for img, run in keys:
        a = hv_by_key.get((img, run, "nsga2"))
        b = hv_by_key.get((img, run, "random"))
        if a is not None and b is not None:
            hv_pairs.append((a, b))
    fr_map: dict[tuple[str, int, str], list[bool]] = {}
    for alg, alg_rows in by_alg.items():
        for row in alg_rows:
            fr_map.setdefault((row.image_id, row.run_id, alg), []).append(
                row.failure.failed)
    fr_pairs = []
    for img, run in keys:
        a = fr_map.get((img, run, "nsga2"))
        b = fr_map.get((img, run, "random"))
        if a and b:
            fr_pairs.append((sum(a) / len(a), sum(b) / len(b)))
    mags_nsga = [r.objectives.f3 for r in by_alg["nsga2"] if r.failure.failed]
    mags_rand = [r.objectives.f3 for r in by_alg["random"] if r.failure.failed]
    block: dict = {}
    for name, pairs in (("hypervolume", hv_pairs), ("failure_rate", fr_pairs)):
        if not pairs:
            block[name] = None
            continue
        test = wilcoxon_signed_rank(pairs)
        block[name] = {
            "nsga2_mean": float(np.mean([a for a, _ in pairs])),
            "random_mean": float(np.mean([b for _, b in pairs])),
            "p_value": test.p_value,
            "effect_rank_biserial": test.effect_size,
            "effect_label": test.effect_label,
            "method": test.method,
            "pairs": len(pairs),
        }
    if mags_nsga and mags_rand:
        test = mann_whitney_u(mags_nsga, mags_rand)
        block["perturbation_magnitude"] = {
            "nsga2_median": float(np.median(mags_nsga)),
            "random_median": float(np.median(mags_rand)),
            "nsga2_mean": float(np.mean(mags_nsga)),
            "random_mean": float(np.mean(mags_rand)),
            "p_value": test.p_value,
            "effect_a12": test.effect_size,
            "effect_label": test.effect_label,
            "method": test.method,
            "n_nsga2": len(mags_nsga),
            "n_random": len(mags_rand),
        }
    else:
        block["perturbation_magnitude"] = None
    return block


def run_campaign(config: CampaignConfig,
                 items: Optional[Sequence[DatasetItem]] = None) -> CampaignReport:
    """Execute the full campaign and assemble its report.

    `items` bypasses dataset loading (in-memory suites); otherwise the
    config's dataset directories are ingested.  Detector failures on a
    single image are logged and the image skipped; zero annotated images is
    an error.
    """
    if items is None:
        if not config.images_dir or not config.labels_dir:
            raise CampaignError("config needs images_dir and labels_dir "
                                "(or pass items directly)")
        items = load_dataset(config.images_dir, config.labels_dir, config.classes)
    items = sorted(items, key=lambda it: it.image_id)
    skipped = [it.image_id for it in items if not it.annotations]
    annotated = [it for it in items if it.annotations]
    if not annotated:
        raise CampaignError("no annotated images in the dataset")

    baseline = _CountingDetector(build_detector(config.detector,
                                                timeout=config.detector_timeout))
    clean_preds: dict[str, tuple[Detection, ...]] = {}
    usable = []
    errors: list[str] = []
    for item in annotated:
        try:
            clean_preds[item.image_id] = conf_filter(
                baseline.detect(item.image), config.thresholds.conf_floor)
            usable.append(item)
        except Exception as exc:  # detector failure: skip image, continue
            errors.append(f"{item.image_id}: baseline detection failed: {exc}")
            logger.warning("skipping image %s: %s", item.image_id, exc)
    if hasattr(baseline.inner, "close"):
        baseline.inner.close()
    if not usable:
        raise CampaignError("baseline detection failed on every image")

    run_seeds = config.run_seeds()
    tasks = [
        _TaskSpec(item=item, clean_preds=clean_preds[item.image_id],
                  run_index=ri, run_seed=seed, algorithm=alg, config=config)
        for item in usable
        for ri, seed in enumerate(run_seeds)
        for alg in config.algorithms
    ]
    if config.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    # Deterministic reduction order regardless of executor scheduling.
    order = {alg: i for i, alg in enumerate(config.algorithms)}
    results.sort(key=lambda r: (r.image_id, r.run_index, order[r.algorithm]))

    rows: list[CandidateRow] = []
    archive_rows: list[ArchiveRow] = []
    hv_rows: list[tuple[str, int, str, float]] = []
    detector_calls = {alg: 0 for alg in config.algorithms}
    detector_calls["baseline"] = baseline.calls
    for res in results:
        rows.extend(res.rows)
        archive_rows.extend(res.archive_rows)
        hv_rows.append((res.image_id, res.run_index, res.algorithm, res.hv))
        detector_calls[res.algorithm] += res.detector_calls
        errors.extend(res.errors)

    summary = _build_summary(config, rows, hv_rows, n_images=len(usable))
    transferability = {
        alg: {config.detector: {config.detector:
                                summary["algorithms"][alg]["failure_rate"]}}
        for alg in config.algorithms
    }
    return CampaignReport(config=config, candidate_rows=rows,
                          archive_rows=archive_rows, hv_rows=hv_rows,
                          detector_calls=detector_calls, run_seeds=run_seeds,
                          skipped_images=skipped, errors=errors,
                          summary=summary, transferability=transferability)


# --- transferability replay ---------------------------------------------------

@dataclass(frozen=True)
class ReplayRecord:
    target: str
    source: str
    image_id: str
    run_id: int
    algorithm: str
    evaluation_index: int
    genome: PerturbationGenome
    failed: bool


@dataclass
class TransferabilityResult:
    rates: dict[str, dict[str, float]]  # target -> source -> failure rate
    records: list[ReplayRecord]

    def to_json_dict(self) -> dict:
        return {"targets": {t: dict(sorted(s.items()))
                            for t, s in sorted(self.rates.items())}}


def replay_genome(genome: PerturbationGenome, item: DatasetItem,
                  detector: Detector,
                  thresholds: FailureThresholds) -> FailureRecord:
    """Re-render one archived genome on its image and classify under a detector."""
    perturbed = apply_perturbation(item.image, genome)
    preds = conf_filter(detector.detect(perturbed), thresholds.conf_floor)
    return classify_failures(item.annotations, preds, thresholds)


def transferability_matrix(
    archives_by_source: dict[str, Sequence[ArchiveRow]],
    detectors: dict[str, Detector],
    test_items: Sequence[DatasetItem],
    thresholds: FailureThresholds,
) -> TransferabilityResult:
    """Cell (target, source) = failure rate of source genomes under the target detector.

    Genomes are re-rendered on the test item sharing their image id; an
    archive referencing an unknown image id is an error naming the id.
    """
    items_by_id = {it.image_id: it for it in test_items}
    for source, rows in archives_by_source.items():
        for row in rows:
            if row.image_id not in items_by_id:
                raise CampaignError(
                    f"archive for source {source!r} references image id "
                    f"{row.image_id!r} missing from the test set")
    rates: dict[str, dict[str, float]] = {}
    records: list[ReplayRecord] = []
    for target, detector in detectors.items():
        rates[target] = {}
        for source, archive_rows in archives_by_source.items():
            failed_flags = []
            for row in archive_rows:
                item = items_by_id[row.image_id]
                record = replay_genome(row.genome, item, detector, thresholds)
                failed_flags.append(record.failed)
                records.append(ReplayRecord(
                    target=target, source=source, image_id=row.image_id,
                    run_id=row.run_id, algorithm=row.algorithm,
                    evaluation_index=row.evaluation_index,
                    genome=row.genome, failed=record.failed))
            rates[target][source] = (
                sum(failed_flags) / len(failed_flags) if failed_flags else 0.0)
    return TransferabilityResult(rates=rates, records=records)


def archive_rows_from_report(report: CampaignReport,
                             algorithm: Optional[str] = None) -> list[ArchiveRow]:
    rows = report.archive_rows
    if algorithm is not None:
        rows = [r for r in rows if r.algorithm == algorithm]
    return list(rows)
