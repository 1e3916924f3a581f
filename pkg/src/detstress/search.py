"""NSGA-II and the budget-matched random-search baseline.

Both algorithms consume exactly population_size * generations detector
evaluations per run (the initial population counts as generation 1) and
return the mutually nondominated subset of their final candidate set, so
runs are directly comparable under the same budget.

Variation operators are real-coded simulated binary crossover
(distribution index 15, crossover probability 0.9, per-variable exchange
probability 0.5) and bounded polynomial mutation (distribution index 20,
per-variable probability 1/7), with binary tournament selection on
(rank, crowding distance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .detection import DatasetItem
from .detectors import Detector
from .objectives import DEFAULT_CONF_FLOOR, EvaluatedCandidate, evaluate_candidate
from .perturbation import GenomeBounds, PerturbationGenome, repair_genome, sample_genome

SBX_ETA = 15.0
SBX_PROB = 0.9
MUTATION_ETA = 20.0
N_VARIABLES = 7
MUTATION_PROB = 1.0 / N_VARIABLES


@dataclass(frozen=True)
class SearchConfig:
    population_size: int = 40
    generations: int = 500
    runs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2 != 0:
            raise ValueError("population_size must be even and >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    @property
    def total_evaluations(self) -> int:
        return self.population_size * self.generations


@dataclass(frozen=True)
class ParetoArchive:
    """Final nondominated candidate set for one (image, run, algorithm)."""

    image_id: str
    run_id: int
    algorithm: str  # "nsga2" | "random"
    candidates: tuple[EvaluatedCandidate, ...]

    def objective_points(self) -> list[tuple[float, float, float]]:
        return [c.objectives.as_tuple() for c in self.candidates]


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Minimization dominance: a <= b componentwise with at least one strict."""
    not_worse = all(x <= y for x, y in zip(a, b))
    strictly_better = any(x < y for x, y in zip(a, b))
    return not_worse and strictly_better


def nondominated_sort(points: Sequence[Sequence[float]]) -> list[list[int]]:
    """Fast nondominated sorting into fronts of indices (front 0 first)."""
    n = len(points)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts: list[list[int]] = [[]]
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(points[i], points[j]):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif dominates(points[j], points[i]):
                dominated_by[j].append(i)
                domination_count[i] += 1
    for i in range(n):
        if domination_count[i] == 0:
            fronts[0].append(i)
    current = 0
    while fronts[current]:
        nxt = []
        for i in fronts[current]:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current += 1
        fronts.append(nxt)
    fronts.pop()  # trailing empty front
    return fronts


def nondominated_subset(points: Sequence[Sequence[float]]) -> list[int]:
    if not points:
        return []
    return sorted(nondominated_sort(points)[0])


def crowding_distance(front: Sequence[Sequence[float]]) -> list[float]:
    """Per-objective sorted-neighbor gap sums, range-normalized.

    Boundary points get +inf; an objective with zero range contributes 0.
    """
    n = len(front)
    if n == 0:
        return []
    if n <= 2:
        return [math.inf] * n
    m = len(front[0])
    distance = [0.0] * n
    for k in range(m):
        order = sorted(range(n), key=lambda i: front[i][k])
        lo = front[order[0]][k]
        hi = front[order[-1]][k]
        distance[order[0]] = math.inf
        distance[order[-1]] = math.inf
        span = hi - lo
        if span == 0.0:
            continue
        for pos in range(1, n - 1):
            i = order[pos]
            if distance[i] == math.inf:
                continue
            gap = front[order[pos + 1]][k] - front[order[pos - 1]][k]
            distance[i] += gap / span
    return distance


def _rank_and_crowding(points: Sequence[Sequence[float]]) -> tuple[list[int], list[float]]:
    ranks = [0] * len(points)
    crowd = [0.0] * len(points)
    for rank, front in enumerate(nondominated_sort(points)):
        ranks_points = [points[i] for i in front]
        dists = crowding_distance(ranks_points)
        for i, d in zip(front, dists):
            ranks[i] = rank
            crowd[i] = d
    return ranks, crowd


def _sbx_pair(p1: np.ndarray, p2: np.ndarray, low: np.ndarray, high: np.ndarray,
              rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Bounded simulated binary crossover on one parent pair."""
    c1 = p1.copy()
    c2 = p2.copy()
    if rng.random() > SBX_PROB:
        return c1, c2
    for k in range(len(p1)):
        if rng.random() > 0.5:
            continue
        if abs(p1[k] - p2[k]) < 1e-14:
            continue
        y1 = min(p1[k], p2[k])
        y2 = max(p1[k], p2[k])
        lb, ub = low[k], high[k]
        rand = rng.random()
        # child near the lower parent
        beta = 1.0 + (2.0 * (y1 - lb) / (y2 - y1))
        alpha = 2.0 - beta ** -(SBX_ETA + 1.0)
        if rand <= 1.0 / alpha:
            betaq = (rand * alpha) ** (1.0 / (SBX_ETA + 1.0))
        else:
            betaq = (1.0 / (2.0 - rand * alpha)) ** (1.0 / (SBX_ETA + 1.0))
        child1 = 0.5 * ((y1 + y2) - betaq * (y2 - y1))
        # child near the upper parent
        beta = 1.0 + (2.0 * (ub - y2) / (y2 - y1))
        alpha = 2.0 - beta ** -(SBX_ETA + 1.0)
        if rand <= 1.0 / alpha:
            betaq = (rand * alpha) ** (1.0 / (SBX_ETA + 1.0))
        else:
            betaq = (1.0 / (2.0 - rand * alpha)) ** (1.0 / (SBX_ETA + 1.0))
        child2 = 0.5 * ((y1 + y2) + betaq * (y2 - y1))
        child1 = min(max(child1, lb), ub)
        child2 = min(max(child2, lb), ub)
        if rng.random() <= 0.5:
            child1, child2 = child2, child1
        c1[k] = child1
        c2[k] = child2
    return c1, c2


def _polynomial_mutation(x: np.ndarray, low: np.ndarray, high: np.ndarray,
                         rng: np.random.Generator) -> np.ndarray:
    """Bounded polynomial mutation, per-variable probability 1/7."""
    y = x.copy()
    for k in range(len(x)):
        if rng.random() > MUTATION_PROB:
            continue
        lb, ub = low[k], high[k]
        span = ub - lb
        if span <= 0:
            continue
        delta1 = (y[k] - lb) / span
        delta2 = (ub - y[k]) / span
        rand = rng.random()
        mut_pow = 1.0 / (MUTATION_ETA + 1.0)
        if rand < 0.5:
            xy = 1.0 - delta1
            val = 2.0 * rand + (1.0 - 2.0 * rand) * xy ** (MUTATION_ETA + 1.0)
            deltaq = val ** mut_pow - 1.0
        else:
            xy = 1.0 - delta2
            val = 2.0 * (1.0 - rand) + 2.0 * (rand - 0.5) * xy ** (MUTATION_ETA + 1.0)
            deltaq = 1.0 - val ** mut_pow
        y[k] = min(max(y[k] + deltaq * span, lb), ub)
    return y


def _tournament(rng: np.random.Generator, ranks: list[int],
                crowd: list[float]) -> int:
    i = int(rng.integers(len(ranks)))
    j = int(rng.integers(len(ranks)))
    if ranks[i] != ranks[j]:
        return i if ranks[i] < ranks[j] else j
    if crowd[i] != crowd[j]:
        return i if crowd[i] > crowd[j] else j
    return i


def _archive_from(image_id: str, run_id: int, algorithm: str,
                  candidates: Sequence[EvaluatedCandidate]) -> ParetoArchive:
    valid = [c for c in candidates if c.valid]
    points = [c.objectives.as_tuple() for c in valid]
    keep = nondominated_subset(points)
    return ParetoArchive(image_id=image_id, run_id=run_id, algorithm=algorithm,
                         candidates=tuple(valid[i] for i in keep))


def nsga2_run(item: DatasetItem,
              bounds: GenomeBounds,
              detector: Detector,
              config: SearchConfig,
              run_seed: int,
              *,
              conf_floor: float = DEFAULT_CONF_FLOOR,
              run_id: Optional[int] = None,
              observer: Optional[Callable[[int, list[EvaluatedCandidate]], None]] = None,
              ) -> ParetoArchive:
    """One NSGA-II run; returns the final population's nondominated set.

    Fully determined by (item, bounds, config, run_seed).  `observer` is
    called with (generation, population) after each environmental
    selection, for instrumentation.  `run_id` labels the archive and
    defaults to the seed.
    """
    if not item.annotations:
        raise ValueError(f"item {item.image_id} has no annotations")
    rng = np.random.default_rng(run_seed)
    low, high = bounds.scalar_low_high()
    pop_size = config.population_size
    epsilon = bounds.epsilon
    eval_counter = 0

    def evaluate(genome: PerturbationGenome) -> EvaluatedCandidate:
        nonlocal eval_counter
        eval_counter += 1
        return evaluate_candidate(item, genome, detector, epsilon=epsilon,
                                  conf_floor=conf_floor,
                                  evaluation_index=eval_counter)

    population = [evaluate(sample_genome(rng, bounds)) for _ in range(pop_size)]
    if observer is not None:
        observer(1, list(population))
    for generation in range(2, config.generations + 1):
        points = [c.objectives.as_tuple() for c in population]
        ranks, crowd = _rank_and_crowding(points)
        offspring: list[EvaluatedCandidate] = []
        while len(offspring) < pop_size:
            pa = np.array(population[_tournament(rng, ranks, crowd)].genome.as_vector())
            pb = np.array(population[_tournament(rng, ranks, crowd)].genome.as_vector())
            ca, cb = _sbx_pair(pa, pb, low, high, rng)
            for vec in (ca, cb):
                if len(offspring) >= pop_size:
                    break
                mutated = _polynomial_mutation(vec, low, high, rng)
                offspring.append(evaluate(repair_genome(mutated, bounds)))
        combined = population + offspring
        combined_points = [c.objectives.as_tuple() for c in combined]
        fronts = nondominated_sort(combined_points)
        survivors: list[int] = []
        for front in fronts:
            if len(survivors) + len(front) <= pop_size:
                survivors.extend(front)
                continue
            dists = crowding_distance([combined_points[i] for i in front])
            # Fill the remainder by descending crowding; stable on ties.
            order = sorted(range(len(front)), key=lambda i: -dists[i])
            survivors.extend(front[i] for i in order[: pop_size - len(survivors)])
            break
        population = [combined[i] for i in survivors]
        if observer is not None:
            observer(generation, list(population))
    assert eval_counter == config.total_evaluations
    label = run_seed if run_id is None else run_id
    return _archive_from(item.image_id, label, "nsga2", population)


def random_search_run(item: DatasetItem,
                      bounds: GenomeBounds,
                      detector: Detector,
                      config: SearchConfig,
                      run_seed: int,
                      *,
                      conf_floor: float = DEFAULT_CONF_FLOOR,
                      run_id: Optional[int] = None,
                      collect_all: Optional[list[EvaluatedCandidate]] = None,
                      ) -> ParetoArchive:
    """Uniform random search with the same evaluation budget as NSGA-II.

    Draws total_evaluations genomes, evaluates all, and archives the
    nondominated subset.  When `collect_all` is given, every evaluated
    candidate is appended to it (the all-evaluations reading used by the
    opt-in campaign flag).
    """
    if not item.annotations:
        raise ValueError(f"item {item.image_id} has no annotations")
    rng = np.random.default_rng(run_seed)
    epsilon = bounds.epsilon
    evaluated = []
    for index in range(1, config.total_evaluations + 1):
        genome = sample_genome(rng, bounds)
        cand = evaluate_candidate(item, genome, detector, epsilon=epsilon,
                                  conf_floor=conf_floor, evaluation_index=index)
        evaluated.append(cand)
    if collect_all is not None:
        collect_all.extend(evaluated)
    label = run_seed if run_id is None else run_id
    return _archive_from(item.image_id, label, "random", evaluated)


def assert_archive_nondominated(archive: ParetoArchive) -> None:
    """Raise if any archived candidate dominates another (invariant check)."""
    points = archive.objective_points()
    for i, a in enumerate(points):
        for j, b in enumerate(points):
            if i != j and dominates(a, b):
                raise AssertionError(
                    f"archive violates nondominance: {a} dominates {b}")
