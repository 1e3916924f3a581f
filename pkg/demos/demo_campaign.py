"""A small end-to-end campaign: search, classify, aggregate, emit reports.

Writes the CSV/JSON report set to demos/campaign_out/ and prints the
headline comparison (hypervolume, failure rate, perturbation magnitude),
then replays the archives against a second detector for a transfer check.
"""

from pathlib import Path

from detstress import (
    CampaignConfig,
    SearchConfig,
    archive_rows_from_report,
    build_detector,
    emit_reports,
    items_from_scenes,
    make_random_scene_suite,
    run_campaign,
    transferability_matrix,
)

OUT = Path(__file__).parent / "campaign_out"

items = items_from_scenes(make_random_scene_suite(
    n_scenes=3, seed=17, contrast_range=(64, 78)))
config = CampaignConfig(
    search=SearchConfig(population_size=16, generations=30, runs=3, seed=1),
    seed=1)
report = run_campaign(config, items=items)
emit_reports(report, OUT)

print(f"campaign over {len(items)} scenes, {config.search.runs} runs, "
      f"budget {config.search.total_evaluations} evaluations/run/algorithm")
print(f"detector calls: {report.detector_calls}")
for algorithm, block in sorted(report.summary["algorithms"].items()):
    print(f"\n{algorithm}:")
    print(f"  archived candidates {block['candidates']}")
    print(f"  failure rate        {block['failure_rate']:.4f}")
    print(f"  occurrences         {block['failure_occurrences']}")
    print(f"  mean hypervolume    {block['hv_mean']:.4f}")

comparison = report.summary["comparison"]
hv = comparison["hypervolume"]
print(f"\npaired hypervolume: p={hv['p_value']:.4g} "
      f"r_rb={hv['effect_rank_biserial']:.3f} ({hv['effect_label']})")
mag = comparison["perturbation_magnitude"]
if mag:
    print(f"failing-candidate f3 medians: nsga2={mag['nsga2_median']:.4f} "
          f"random={mag['random_median']:.4f} (p={mag['p_value']:.4g})")

result = transferability_matrix(
    {"tdet40": archive_rows_from_report(report)},
    {"tdet40": build_detector("synthetic"),
     "tdet30": build_detector("synthetic:tdet=30")},
    items, config.thresholds)
print("\ntransfer of the tdet40 archives:")
for target, sources in sorted(result.rates.items()):
    for source, rate in sorted(sources.items()):
        print(f"  target={target} source={source} failure_rate={rate:.4f}")
print(f"\nreports in {OUT}")
