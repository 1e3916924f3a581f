import math

import pytest

from detstress.detection import DatasetItem
from detstress.detectors import SyntheticDetector
from detstress.geometry import build_roi
from detstress.perturbation import GenomeBounds
from detstress.search import (
    ParetoArchive,
    SearchConfig,
    assert_archive_nondominated,
    crowding_distance,
    dominates,
    nondominated_sort,
    nsga2_run,
    random_search_run,
)
from detstress.stats import hypervolume

from conftest import single_disk_scene
from oracles import nondominated_brute


def make_item(fill=170, radius=12):
    image, annotations = single_disk_scene(fill=fill, radius=radius)
    return DatasetItem(image_id="scene", image=image, annotations=annotations)


def make_bounds(item, margin=5.0):
    roi = build_roi(item.annotations, margin, item.image_size)
    return GenomeBounds(roi=roi)


class TestSearchConfig:
    def test_defaults_match_protocol(self):
        config = SearchConfig()
        assert config.population_size == 40
        assert config.generations == 500
        assert config.runs == 10
        assert config.total_evaluations == 20_000

    @pytest.mark.parametrize("pop", [0, 2, 3, 5])
    def test_population_constraints(self, pop):
        with pytest.raises(ValueError):
            SearchConfig(population_size=pop)

    def test_generation_constraint(self):
        with pytest.raises(ValueError):
            SearchConfig(generations=0)


class TestDominance:
    def test_strict(self):
        assert dominates((0, 0, 0), (1, 1, 1))
        assert not dominates((1, 1, 1), (0, 0, 0))

    def test_equal_does_not_dominate(self):
        assert not dominates((1, 2, 3), (1, 2, 3))

    def test_partial(self):
        assert dominates((0, 1, 1), (1, 1, 1))
        assert not dominates((0, 1, 2), (1, 1, 1))


class TestNondominatedSort:
    def test_single_point(self):
        assert nondominated_sort([(0.5, 0.5, 0.5)]) == [[0]]

    def test_strict_dominance_two_fronts(self):
        fronts = nondominated_sort([(0, 0, 0), (1, 1, 1)])
        assert fronts == [[0], [1]]

    def test_three_point_example(self):
        fronts = nondominated_sort([(0, 1, 0), (1, 0, 0), (1, 1, 0)])
        assert fronts == [[0, 1], [2]]

    def test_front_zero_matches_brute_force(self, rng):
        for _ in range(50):
            points = [tuple(rng.uniform(0, 1, 3)) for _ in range(30)]
            fronts = nondominated_sort(points)
            assert set(fronts[0]) == nondominated_brute(points)
            assert sorted(i for front in fronts for i in front) == list(range(30))


class TestCrowdingDistance:
    def test_two_points_both_infinite(self):
        d = crowding_distance([(0, 1, 0), (1, 0, 0)])
        assert d == [math.inf, math.inf]

    def test_three_collinear_points(self):
        # middle point: gap (1.0 - 0.0) normalized by span 1.0 in objective 0
        d = crowding_distance([(0.0, 0, 0), (0.4, 0, 0), (1.0, 0, 0)])
        assert d[0] == math.inf and d[2] == math.inf
        assert d[1] == pytest.approx(1.0)

    def test_identical_points_zero_interior(self):
        d = crowding_distance([(0.5, 0.5, 0.5)] * 4)
        assert d[0] == math.inf  # boundary slots still get inf
        assert 0.0 in d

    def test_empty(self):
        assert crowding_distance([]) == []


class TestRuns:
    def test_nsga2_budget_and_archive(self):
        item = make_item()
        bounds = make_bounds(item)
        det = SyntheticDetector()
        config = SearchConfig(population_size=4, generations=1, runs=1)
        archive = nsga2_run(item, bounds, det, config, run_seed=5)
        assert isinstance(archive, ParetoArchive)
        assert archive.algorithm == "nsga2"
        assert 1 <= len(archive.candidates) <= 4
        assert max(c.evaluation_index for c in archive.candidates) <= 4
        assert_archive_nondominated(archive)

    def test_nsga2_deterministic(self):
        item = make_item()
        bounds = make_bounds(item)
        det = SyntheticDetector()
        config = SearchConfig(population_size=8, generations=4, runs=1)
        a = nsga2_run(item, bounds, det, config, run_seed=9)
        b = nsga2_run(item, bounds, det, config, run_seed=9)
        assert [c.genome for c in a.candidates] == [c.genome for c in b.candidates]
        assert [c.objectives for c in a.candidates] == \
            [c.objectives for c in b.candidates]

    def test_nsga2_seed_changes_archive(self):
        item = make_item()
        bounds = make_bounds(item)
        det = SyntheticDetector()
        config = SearchConfig(population_size=8, generations=4, runs=1)
        a = nsga2_run(item, bounds, det, config, run_seed=1)
        b = nsga2_run(item, bounds, det, config, run_seed=2)
        assert [c.genome for c in a.candidates] != [c.genome for c in b.candidates]

    def test_random_search_single_evaluation(self):
        item = make_item()
        bounds = make_bounds(item)
        config = SearchConfig(population_size=4, generations=1, runs=1)
        # 4 evaluations; archive is the nondominated subset
        archive = random_search_run(item, bounds, SyntheticDetector(), config, 3)
        assert archive.algorithm == "random"
        assert 1 <= len(archive.candidates) <= 4
        assert_archive_nondominated(archive)

    def test_random_search_deterministic(self):
        item = make_item()
        bounds = make_bounds(item)
        config = SearchConfig(population_size=6, generations=3, runs=1)
        a = random_search_run(item, bounds, SyntheticDetector(), config, 12)
        b = random_search_run(item, bounds, SyntheticDetector(), config, 12)
        assert [c.genome for c in a.candidates] == [c.genome for c in b.candidates]

    def test_random_archive_nondominated_against_all_evaluations(self):
        item = make_item()
        bounds = make_bounds(item)
        config = SearchConfig(population_size=10, generations=4, runs=1)
        everything = []
        archive = random_search_run(item, bounds, SyntheticDetector(), config,
                                    31, collect_all=everything)
        assert len(everything) == config.total_evaluations
        points = [c.objectives.as_tuple() for c in everything]
        brute = nondominated_brute(points)
        archive_points = sorted(c.objectives.as_tuple()
                                for c in archive.candidates)
        brute_points = sorted({points[i] for i in brute})
        assert archive_points == brute_points

    def test_budget_parity(self):
        item = make_item()
        bounds = make_bounds(item)
        config = SearchConfig(population_size=6, generations=4, runs=1)

        class Counting(SyntheticDetector):
            calls = 0

            def _run(self, image):
                type(self).calls += 1
                return super()._run(image)

        class CountA(Counting):
            calls = 0

        class CountB(Counting):
            calls = 0

        nsga2_run(item, bounds, CountA(), config, 5)
        random_search_run(item, bounds, CountB(), config, 5)
        assert CountA.calls == CountB.calls == config.total_evaluations

    def test_elitism_and_hv_improvement(self):
        item = make_item(fill=170)
        bounds = make_bounds(item)
        config = SearchConfig(population_size=16, generations=12, runs=1)
        best_per_gen = []
        hv_per_gen = []

        def observer(gen, population):
            points = sorted(c.objectives.as_tuple() for c in population)
            best_per_gen.append(points[0])
            hv_per_gen.append(hypervolume(points, (1, 1, 1)))

        nsga2_run(item, bounds, SyntheticDetector(), config, 17,
                  observer=observer)
        assert len(best_per_gen) == config.generations
        for previous, current in zip(best_per_gen, best_per_gen[1:]):
            assert current <= previous  # lexicographic best never worsens
        assert hv_per_gen[-1] >= hv_per_gen[0]

    def test_run_id_label(self):
        item = make_item()
        bounds = make_bounds(item)
        config = SearchConfig(population_size=4, generations=1, runs=1)
        archive = nsga2_run(item, bounds, SyntheticDetector(), config, 77,
                            run_id=3)
        assert archive.run_id == 3

    def test_unannotated_item_rejected(self):
        image, _ = single_disk_scene()
        item = DatasetItem(image_id="x", image=image, annotations=())
        config = SearchConfig(population_size=4, generations=1, runs=1)
        with pytest.raises(ValueError):
            nsga2_run(item, make_bounds(make_item()), SyntheticDetector(),
                      config, 0)
