"""NSGA-II vs budget-matched random search on one synthetic scene.

Runs both algorithms with the same small evaluation budget and compares
their archives by hypervolume and failure content.
"""

from detstress import (
    FailureThresholds,
    GenomeBounds,
    SearchConfig,
    SyntheticDetector,
    build_roi,
    classify_failures,
    hypervolume,
    make_random_scene_suite,
    items_from_scenes,
    nsga2_run,
    random_search_run,
)

items = items_from_scenes(make_random_scene_suite(
    n_scenes=1, seed=8, contrast_range=(64, 78)))
item = items[0]
print(f"scene {item.image_id}: {len(item.annotations)} objects")

bounds = GenomeBounds(roi=build_roi(item.annotations, 5.0, item.image_size))
detector = SyntheticDetector()
config = SearchConfig(population_size=16, generations=25, runs=1, seed=0)
thresholds = FailureThresholds()

for runner, label in ((nsga2_run, "nsga2"), (random_search_run, "random")):
    archive = runner(item, bounds, detector, config, run_seed=42)
    points = archive.objective_points()
    hv = hypervolume(points, (1.0, 1.0, 1.0))
    failing = sum(
        classify_failures(item.annotations, c.predictions, thresholds).failed
        for c in archive.candidates)
    best = min(points)
    print(f"\n{label}: {config.total_evaluations} evaluations, "
          f"archive size {len(archive.candidates)}")
    print(f"  hypervolume    {hv:.4f}")
    print(f"  failing        {failing}/{len(archive.candidates)}")
    print(f"  best objective ({best[0]:.3f}, {best[1]:.3f}, {best[2]:.3f})")
    f3s = sorted(p[2] for p in points)
    print(f"  f3 range       [{f3s[0]:.4f}, {f3s[-1]:.4f}]")
