"""SPEA2 selection and the generational loop that evolves projection models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .gp_core import GpParams, ProjectionModel, ramped_half_and_half, subtree_crossover, subtree_mutation
from .objectives import FitnessVector


@dataclass
class Spea2Stats:
    strength: int = 0
    raw: int = 0
    density: float = 0.5
    fitness: float = 0.5
    sigma_k: float = 0.0


@dataclass
class Individual:
    model: ProjectionModel
    fitness: FitnessVector | None = None
    accuracies: tuple[float, ...] = ()
    spea2: Spea2Stats = field(default_factory=Spea2Stats)


@dataclass(frozen=True)
class MoeaParams:
    population: int = 400
    generations: int = 100
    archive_size: int = 100
    tournament_size: int = 2

    def __post_init__(self):
        if min(self.population, self.archive_size, self.tournament_size) < 1 or self.generations < 0:
            raise ValueError(f"invalid MOEA parameters: {self}")


def dominates(a, b) -> bool:
    """Pareto dominance under minimization."""
    a = a.as_tuple() if isinstance(a, FitnessVector) else tuple(a)
    b = b.as_tuple() if isinstance(b, FitnessVector) else tuple(b)
    strictly = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strictly = True
    return strictly


def objective_matrix(individuals: Sequence[Individual]) -> np.ndarray:
    return np.array([ind.fitness.as_tuple() for ind in individuals], dtype=float).reshape(len(individuals), -1)


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """D[i, j] is True when row i dominates row j."""
    le = (F[:, None, :] <= F[None, :, :]).all(axis=2)
    lt = (F[:, None, :] < F[None, :, :]).any(axis=2)
    return le & lt


def normalized_distances(F: np.ndarray) -> np.ndarray:
    """Euclidean distances after mapping each objective to [0, 1] by its min/max."""
    lo = F.min(axis=0)
    span = F.max(axis=0) - lo
    N = np.where(span > 0, (F - lo) / np.where(span > 0, span, 1.0), 0.0)
    diff = N[:, None, :] - N[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def spea2_assign(union: Sequence[Individual]) -> np.ndarray:
    """Fill ``spea2`` on every member of the union; returns the distance matrix."""
    n = len(union)
    if n == 0:
        return np.zeros((0, 0))
    F = objective_matrix(union)
    D = dominance_matrix(F)
    strength = D.sum(axis=1)
    raw = (D * strength[:, None]).sum(axis=0)
    dist = normalized_distances(F)
    k = int(math.isqrt(n))
    for i, ind in enumerate(union):
        if n > 1:
            others = np.sort(np.delete(dist[i], i))
            sigma = float(others[min(k, n - 1) - 1])
        else:
            sigma = 0.0
        density = 1.0 / (sigma + 2.0)
        ind.spea2 = Spea2Stats(int(strength[i]), int(raw[i]), density, int(raw[i]) + density, sigma)
    return dist


def _truncate(keep: list[int], dist: np.ndarray, capacity: int) -> list[int]:
    keep = list(keep)
    while len(keep) > capacity:
        sub = dist[np.ix_(keep, keep)]
        np.fill_diagonal(sub, np.inf)
        profiles = np.sort(sub, axis=1)
        # lexicographically smallest nearest-neighbour profile; ties -> lowest position
        order = np.lexsort(profiles.T[::-1])
        keep.pop(int(order[0]))
    return keep


def environmental_selection(union: Sequence[Individual], capacity: int, dist: np.ndarray | None = None) -> list[Individual]:
    if capacity < 1:
        raise ValueError("archive capacity must be >= 1")
    if dist is None:
        dist = normalized_distances(objective_matrix(union))
    nondominated = [i for i, ind in enumerate(union) if ind.spea2.fitness < 1.0]
    if len(nondominated) > capacity:
        chosen = _truncate(nondominated, dist, capacity)
    else:
        rest = [i for i, ind in enumerate(union) if ind.spea2.fitness >= 1.0]
        rest.sort(key=lambda i: union[i].spea2.fitness)  # stable: ties keep insertion order
        chosen = nondominated + rest[: capacity - len(nondominated)]
    return [union[i] for i in chosen]


def tournament_select(archive: Sequence[Individual], size: int, rng: np.random.Generator) -> Individual:
    if not archive:
        raise ValueError("cannot select from an empty archive")
    picks = rng.integers(len(archive), size=size)
    best = min(picks, key=lambda i: (archive[i].spea2.fitness, archive[i].spea2.sigma_k, i))
    return archive[int(best)]


@dataclass
class GenerationRecord:
    generation: int
    archive_size: int
    best: tuple[float, float, float]
    mean: tuple[float, float, float]

    def row(self) -> list:
        return [self.generation, *self.best, *self.mean, self.archive_size]


HISTORY_HEADER = [
    "generation",
    "min_c_error",
    "min_v_index",
    "min_s_size",
    "mean_c_error",
    "mean_v_index",
    "mean_s_size",
    "archive_size",
]


@dataclass
class EvolutionResult:
    archive: list[Individual]
    history: list[GenerationRecord]


def breed(archive: Sequence[Individual], count: int, moea: MoeaParams, gp: GpParams, rng: np.random.Generator) -> list[ProjectionModel]:
    children: list[ProjectionModel] = []
    while len(children) < count:
        a = tournament_select(archive, moea.tournament_size, rng).model
        b = tournament_select(archive, moea.tournament_size, rng).model
        if rng.random() < gp.crossover_rate:
            t = int(rng.integers(a.target_dims))
            ta, tb = subtree_crossover(a.trees[t], b.trees[t], rng, gp.max_depth)
            a, b = a.replace(t, ta), b.replace(t, tb)
        for child in (a, b):
            if rng.random() < gp.mutation_rate:
                t = int(rng.integers(child.target_dims))
                child = child.replace(t, subtree_mutation(child.trees[t], gp, rng))
            children.append(child)
    return children[:count]


def unique_models(individuals: Sequence[Individual]) -> list[Individual]:
    """Drop later copies of an already present genotype."""
    seen = set()
    out = []
    for ind in individuals:
        key = tuple(t.root for t in ind.model.trees)
        if key not in seen:
            seen.add(key)
            out.append(ind)
    return out


def run_evolution(
    evaluate: Callable[[ProjectionModel], object],
    moea: MoeaParams,
    gp: GpParams,
    rng: np.random.Generator,
    on_generation: Callable[[GenerationRecord], None] | None = None,
) -> EvolutionResult:
    """SPEA2 loop. ``evaluate`` maps a model to an object with ``fitness`` and ``accuracies``.

    Generation 0 is the ramped half-and-half population; each of the
    ``moea.generations`` later generations is bred from the archive.
    """
    population = [Individual(m) for m in ramped_half_and_half(gp, moea.population, rng)]
    archive: list[Individual] = []
    history: list[GenerationRecord] = []
    for gen in range(moea.generations + 1):
        if gen > 0:
            population = [Individual(m) for m in breed(archive, moea.population, moea, gp, rng)]
        for ind in population:
            if ind.fitness is None:
                ev = evaluate(ind.model)
                ind.fitness = ev.fitness
                ind.accuracies = tuple(ev.accuracies)
        union = unique_models(population + archive)
        dist = spea2_assign(union)
        archive = environmental_selection(union, moea.archive_size, dist)
        F = objective_matrix(archive)
        rec = GenerationRecord(gen, len(archive), tuple(F.min(axis=0)), tuple(F.mean(axis=0)))
        history.append(rec)
        if on_generation is not None:
            on_generation(rec)
    return EvolutionResult(archive, history)
