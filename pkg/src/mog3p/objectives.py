"""Fitness of a projection model: classification error, class separation, size."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classifiers import DEFAULT_BANK, ClassifierSpec, cv_accuracy, stratified_folds
from .gp_core import ProjectionModel, project

NO_SEPARATION = 1e12
AGGREGATIONS = ("min", "max", "mean")


@dataclass(frozen=True, order=True)
class FitnessVector:
    c_error: float
    v_index: float
    s_size: int

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.c_error, self.v_index, float(self.s_size))


@dataclass(frozen=True)
class SeparationStats:
    within_ss: float
    between_ss: float
    index: float


@dataclass(frozen=True)
class ObjectiveConfig:
    aggregation: str = "min"
    inner_folds: int = 3
    bank: tuple[ClassifierSpec, ...] = field(default=DEFAULT_BANK)

    def __post_init__(self):
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if self.inner_folds < 2:
            raise ValueError("inner_folds must be >= 2")
        if not self.bank:
            raise ValueError("classifier bank is empty")


def separation_index(points: np.ndarray, labels: np.ndarray) -> SeparationStats:
    """Within-class over between-class sum of squares; lower means better separated.

    Points are rescaled by one global factor before summing so that projections
    with huge values do not overflow; the ratio is unaffected by that factor.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("separation index needs at least two classes")
    centered = P - P.mean(axis=0)
    scale = float(np.max(np.abs(centered))) if centered.size else 0.0
    if not np.isfinite(scale) or scale == 0.0:
        scale = 1.0
    Q = centered / scale
    grand = Q.mean(axis=0)
    within = 0.0
    between = 0.0
    for c in classes:
        Qc = Q[y == c]
        mu = Qc.mean(axis=0)
        within += float(((Qc - mu) ** 2).sum())
        between += Qc.shape[0] * float(((mu - grand) ** 2).sum())
    index = within / between if between > 1e-12 else NO_SEPARATION
    # between is measured on the rescaled points; a degenerate projection stays degenerate
    with np.errstate(over="ignore"):
        s2 = scale * scale
        return SeparationStats(within * s2, between * s2, index)


def aggregate(accuracies: Sequence[float], mode: str) -> float:
    acc = np.asarray(accuracies, dtype=float)
    if mode == "min":
        return float(acc.min())
    if mode == "max":
        return float(acc.max())
    if mode == "mean":
        return float(acc.mean())
    raise ValueError(f"unknown aggregation {mode!r}")


def classifier_accuracies(
    points: np.ndarray, labels: np.ndarray, bank: Sequence[ClassifierSpec], fold_of: np.ndarray
) -> list[float]:
    return [cv_accuracy(spec, points, labels, fold_of) for spec in bank]


def classifiability(
    points: np.ndarray,
    labels: np.ndarray,
    bank: Sequence[ClassifierSpec],
    folds: int,
    mode: str,
    rng: np.random.Generator | None = None,
    fold_of: np.ndarray | None = None,
) -> float:
    """1 - aggregated stratified CV accuracy over the bank."""
    if not bank:
        raise ValueError("classifier bank is empty")
    if fold_of is None:
        if rng is None:
            raise ValueError("need either a fold plan or a random generator")
        fold_of = stratified_folds(labels, folds, rng)
    return 1.0 - aggregate(classifier_accuracies(points, labels, bank, fold_of), mode)


@dataclass
class Evaluation:
    fitness: FitnessVector
    accuracies: tuple[float, ...]


class ModelEvaluator:
    """Scores models on one training partition with a fixed inner fold plan.

    The plan depends only on the seed and labels, so every model in a run is
    judged on identical folds; identical expressions are scored once.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, cfg: ObjectiveConfig, seed: int | Sequence[int]):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=np.int64)
        self.cfg = cfg
        self.fold_of = stratified_folds(self.y, cfg.inner_folds, np.random.default_rng(seed))
        self._cache: dict[tuple, Evaluation] = {}

    def __call__(self, model: ProjectionModel) -> Evaluation:
        key = tuple(t.root for t in model.trees)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._evaluate(model)
            self._cache[key] = hit
        return hit

    def _evaluate(self, model: ProjectionModel) -> Evaluation:
        Z = project(model, self.X)
        acc = tuple(classifier_accuracies(Z, self.y, self.cfg.bank, self.fold_of))
        fitness = FitnessVector(
            c_error=1.0 - aggregate(acc, self.cfg.aggregation),
            v_index=separation_index(Z, self.y).index,
            s_size=model.total_size,
        )
        return Evaluation(fitness, acc)


def evaluate_model(
    model: ProjectionModel, X: np.ndarray, y: np.ndarray, cfg: ObjectiveConfig, seed: int | Sequence[int]
) -> FitnessVector:
    return ModelEvaluator(X, y, cfg, seed)(model).fitness
