"""Report emission and CSV-based re-analysis.

All numeric CSV fields use fixed 6-decimal formatting and LF newlines so
re-emission of the same report is byte-identical.  The manifest records
the config hash, the seed schedule, and per-algorithm detector-call counts
(the budget-parity evidence).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .campaign import (
    ArchiveRow,
    CampaignConfig,
    CampaignReport,
    CandidateRow,
)
from .failures import FAILURE_TYPES
from .objectives import ObjectiveVector
from .perturbation import (
    GENOME_CSV_FIELDS,
    genome_from_csv_fields,
    genome_to_csv_fields,
)
from .stats import hypervolume, mann_whitney_u, wilcoxon_signed_rank

ID_FIELDS = ("image_id", "run_id", "algorithm", "evaluation_index")
OBJECTIVE_FIELDS = ("f1", "f2", "f3")
COUNT_FIELDS = tuple(f"n_{t}" for t in FAILURE_TYPES)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _archive_csv(rows: Sequence[ArchiveRow]) -> str:
    header = list(ID_FIELDS) + list(GENOME_CSV_FIELDS) + list(OBJECTIVE_FIELDS)
    out = []
    for r in rows:
        out.append([r.image_id, str(r.run_id), r.algorithm,
                    str(r.evaluation_index)]
                   + genome_to_csv_fields(r.genome)
                   + [_fmt(v) for v in r.objectives.as_tuple()])
    return _csv_text(header, out)


def _failure_fields(row: CandidateRow) -> list[str]:
    rec = row.failure
    fields = [str(int(rec.failed))]
    fields += [str(rec.counts[t]) for t in FAILURE_TYPES]
    if row.stability is not None:
        fields += [_fmt(row.stability.delta_conf), _fmt(row.stability.delta_loc),
                   row.stability.category_conf, row.stability.category_loc]
    else:
        fields += ["", "", "", ""]
    return fields


def _failures_csv(rows: Sequence[CandidateRow]) -> str:
    header = list(ID_FIELDS) + ["failed"] + list(COUNT_FIELDS) + [
        "delta_conf", "delta_loc", "stability_conf", "stability_loc"]
    out = [[r.image_id, str(r.run_id), r.algorithm, str(r.evaluation_index)]
           + _failure_fields(r) for r in rows]
    return _csv_text(header, out)


def _candidates_csv(rows: Sequence[CandidateRow]) -> str:
    header = (list(ID_FIELDS) + list(GENOME_CSV_FIELDS)
              + list(OBJECTIVE_FIELDS) + ["failed"] + list(COUNT_FIELDS)
              + ["delta_conf", "delta_loc", "stability_conf", "stability_loc"])
    out = []
    for r in rows:
        out.append([r.image_id, str(r.run_id), r.algorithm,
                    str(r.evaluation_index)]
                   + genome_to_csv_fields(r.genome)
                   + [_fmt(v) for v in r.objectives.as_tuple()]
                   + _failure_fields(r))
    return _csv_text(header, out)


def _stability_csv(rows: Sequence[CandidateRow]) -> str:
    header = list(ID_FIELDS) + ["delta_conf", "delta_loc", "stability_conf",
                                "stability_loc", "violation"]
    out = []
    for r in rows:
        if r.stability is None:
            continue
        s = r.stability
        out.append([r.image_id, str(r.run_id), r.algorithm,
                    str(r.evaluation_index), _fmt(s.delta_conf),
                    _fmt(s.delta_loc), s.category_conf, s.category_loc,
                    str(int(s.violation))])
    return _csv_text(header, out)


def config_hash(config: CampaignConfig) -> str:
    canonical = json.dumps(config.to_json_dict(), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _manifest(report: CampaignReport) -> dict:
    return {
        "version": __version__,
        "config": report.config.to_json_dict(),
        "config_sha256": config_hash(report.config),
        "master_seed": report.config.seed,
        "run_seeds": report.run_seeds,
        "detector_calls": report.detector_calls,
        "candidate_rows": len(report.candidate_rows),
        "archive_rows": len(report.archive_rows),
        "skipped_images": report.skipped_images,
        "errors": report.errors,
    }


def emit_reports(report: CampaignReport, outdir: str | Path) -> list[Path]:
    """Write the campaign's CSV/JSON file set; remove partial files on failure."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {
        "candidates.csv": _candidates_csv(report.candidate_rows),
        "archives.csv": _archive_csv(report.archive_rows),
        "failures.csv": _failures_csv(report.candidate_rows),
        "stability.csv": _stability_csv(report.candidate_rows),
        "summary.json": json.dumps(report.summary, indent=2, sort_keys=True) + "\n",
        "transferability.json": json.dumps(report.transferability, indent=2,
                                           sort_keys=True) + "\n",
        "manifest.json": json.dumps(_manifest(report), indent=2,
                                    sort_keys=True) + "\n",
    }
    written: list[Path] = []
    try:
        for name, content in files.items():
            path = outdir / name
            path.write_text(content)
            written.append(path)
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written


def load_archive_rows(path: str | Path) -> list[ArchiveRow]:
    """Read archives.csv back into replayable rows."""
    rows = []
    with open(path, newline="") as fh:
        for record in csv.DictReader(fh):
            genome = genome_from_csv_fields([record[f] for f in GENOME_CSV_FIELDS])
            rows.append(ArchiveRow(
                image_id=record["image_id"],
                run_id=int(record["run_id"]),
                algorithm=record["algorithm"],
                evaluation_index=int(record["evaluation_index"]),
                genome=genome,
                objectives=ObjectiveVector(float(record["f1"]),
                                           float(record["f2"]),
                                           float(record["f3"])),
            ))
    return rows


def _load_failure_records(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def analyze(outdir: str | Path,
            hv_reference: Sequence[float] = (1.0, 1.0, 1.0)) -> dict:
    """Recompute the summary statistics from the emitted CSVs.

    Works from archives.csv + failures.csv alone (6-decimal precision), so
    count-based quantities (failure rates, occurrences) are exact while
    HV/magnitude statistics agree to CSV precision.  Rewrites summary.json.
    """
    outdir = Path(outdir)
    archive_rows = load_archive_rows(outdir / "archives.csv")
    failure_rows = _load_failure_records(outdir / "failures.csv")

    algorithms = sorted({r.algorithm for r in archive_rows}
                        | {r["algorithm"] for r in failure_rows})
    by_key: dict[tuple[str, int, str], list[ArchiveRow]] = {}
    for row in archive_rows:
        by_key.setdefault((row.image_id, row.run_id, row.algorithm), []).append(row)
    hv_by_key = {key: hypervolume([r.objectives for r in rows], hv_reference)
                 for key, rows in by_key.items()}
    f3_by_id = {(r.image_id, r.run_id, r.algorithm, r.evaluation_index):
                r.objectives.f3 for r in archive_rows}

    summary: dict = {
        "images": len({r.image_id for r in archive_rows}),
        "runs": len({r.run_id for r in archive_rows}),
        "algorithms": {},
        "stability": {},
        "source": "analyze",
    }
    fail_by_alg: dict[str, list[dict]] = {a: [] for a in algorithms}
    for rec in failure_rows:
        fail_by_alg[rec["algorithm"]].append(rec)
    mags = {}
    for alg in algorithms:
        recs = fail_by_alg[alg]
        failing = [r for r in recs if r["failed"] == "1"]
        hvs = [hv for (img, run, a), hv in hv_by_key.items() if a == alg]
        mag = [f3_by_id[(r["image_id"], int(r["run_id"]), alg,
                         int(r["evaluation_index"]))]
               for r in failing
               if (r["image_id"], int(r["run_id"]), alg,
                   int(r["evaluation_index"])) in f3_by_id]
        mags[alg] = mag
        summary["algorithms"][alg] = {
            "candidates": len(recs),
            "failing": len(failing),
            "failure_rate": len(failing) / len(recs) if recs else 0.0,
            "failure_occurrences": {
                t: sum(int(r[f"n_{t}"]) for r in recs) for t in FAILURE_TYPES},
            "hv_mean": float(np.mean(hvs)) if hvs else 0.0,
            "magnitude_failing_mean": float(np.mean(mag)) if mag else None,
            "magnitude_failing_median": float(np.median(mag)) if mag else None,
        }
        non_failing = [r for r in recs if r["failed"] == "0"]
        stab: dict = {"non_failing": len(non_failing)}
        for kind, col in (("confidence", "stability_conf"),
                          ("localization", "stability_loc")):
            counts = {c: 0 for c in ("minor", "small", "moderate", "large")}
            for r in non_failing:
                if r[col]:
                    counts[r[col]] += 1
            total = max(len(non_failing), 1)
            stab[kind] = {c: {"count": n, "fraction": n / total}
                          for c, n in counts.items()}
            stab[f"{kind}_violations"] = sum(
                counts[c] for c in ("moderate", "large")) / total
        summary["stability"][alg] = stab

    if {"nsga2", "random"} <= set(algorithms):
        keys = sorted({(img, run) for (img, run, _a) in hv_by_key})
        hv_pairs = [(hv_by_key[(i, r, "nsga2")], hv_by_key[(i, r, "random")])
                    for i, r in keys
                    if (i, r, "nsga2") in hv_by_key and (i, r, "random") in hv_by_key]
        fr_map: dict[tuple[str, int, str], list[int]] = {}
        for rec in failure_rows:
            key = (rec["image_id"], int(rec["run_id"]), rec["algorithm"])
            fr_map.setdefault(key, []).append(int(rec["failed"]))
        fr_pairs = []
        for i, r in keys:
            a = fr_map.get((i, r, "nsga2"))
            b = fr_map.get((i, r, "random"))
            if a and b:
                fr_pairs.append((sum(a) / len(a), sum(b) / len(b)))
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
        if mags.get("nsga2") and mags.get("random"):
            test = mann_whitney_u(mags["nsga2"], mags["random"])
            block["perturbation_magnitude"] = {
                "nsga2_median": float(np.median(mags["nsga2"])),
                "random_median": float(np.median(mags["random"])),
                "nsga2_mean": float(np.mean(mags["nsga2"])),
                "random_mean": float(np.mean(mags["random"])),
                "p_value": test.p_value,
                "effect_a12": test.effect_size,
                "effect_label": test.effect_label,
                "method": test.method,
                "n_nsga2": len(mags["nsga2"]),
                "n_random": len(mags["random"]),
            }
        else:
            block["perturbation_magnitude"] = None
        summary["comparison"] = block

    (outdir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
