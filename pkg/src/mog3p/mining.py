"""Mining of archived models: error/size frontier, feature usage, classifier comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ModelRecord
from .gp_core import ExpressionTree, parse_infix

ARCHIVE_VERSION = 1
DEFAULT_TAU = 0.005


class SchemaError(ValueError):
    pass


@dataclass
class ArchiveDump:
    dataset: dict
    seed: int
    records: list[ModelRecord]
    config_hash: str = ""

    @property
    def feature_names(self) -> list[str]:
        return list(self.dataset["feature_names"])


def load_archive(path: str | Path) -> ArchiveDump:
    with open(path) as fh:
        doc = json.load(fh)
    return parse_archive(doc)


def parse_archive(doc: dict) -> ArchiveDump:
    if doc.get("version") != ARCHIVE_VERSION:
        raise SchemaError(f"archive schema version {doc.get('version')!r} is not {ARCHIVE_VERSION}")
    try:
        records = [
            ModelRecord.from_dict(m, (int(run["repeat"]), int(run["fold"])))
            for run in doc["runs"]
            for m in run["models"]
        ]
        return ArchiveDump(doc["dataset"], int(doc["seed"]), records, doc.get("config_hash", ""))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed archive dump: {exc}") from exc


def extract_features_used(expr: ExpressionTree | str, feature_names: Sequence[str] | None = None) -> set[int]:
    if isinstance(expr, str):
        if feature_names is None:
            raise ValueError("feature names are needed to parse an expression string")
        expr = parse_infix(expr, feature_names)
    return expr.variables()


def _dominates2(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def frontier(records: Sequence[ModelRecord], tau: float = DEFAULT_TAU) -> list[ModelRecord]:
    """Models near the lowest test error that are non-dominated in (train error, size)."""
    if not records:
        return []
    best = min(r.test_error for r in records)
    pool = [r for r in records if r.test_error <= best + tau]
    points = [(r.train_error, r.objectives.s_size) for r in pool]
    # sweep in (size, error) order; a point survives if its error beats every smaller-or-equal size
    order = sorted(range(len(pool)), key=lambda i: (points[i][1], points[i][0], i))
    out = []
    best_err = np.inf
    i = 0
    while i < len(order):
        size = points[order[i]][1]
        group = []
        while i < len(order) and points[order[i]][1] == size:
            group.append(order[i])
            i += 1
        group_best = points[group[0]][0]
        if group_best < best_err:
            out.extend(j for j in group if points[j][0] == group_best)
            best_err = group_best
    return [pool[j] for j in out]


def feature_frequency(records: Sequence[ModelRecord], n_features: int) -> list[int]:
    counts = [0] * n_features
    for r in records:
        for i in r.features_used:
            counts[i] += 1
    return counts


def classifier_summary(records: Sequence[ModelRecord]) -> dict[str, dict[str, float]]:
    by_name: dict[str, list[tuple[float, float]]] = {}
    for r in records:
        for name, tr, te in r.per_classifier:
            by_name.setdefault(name, []).append((tr, te))
    out = {}
    for name, vals in by_name.items():
        a = np.array(vals)
        ddof = 1 if len(a) > 1 else 0
        out[name] = {
            "train_mean": float(a[:, 0].mean()),
            "train_std": float(a[:, 0].std(ddof=ddof)),
            "test_mean": float(a[:, 1].mean()),
            "test_std": float(a[:, 1].std(ddof=ddof)),
        }
    return out


@dataclass
class MiningReport:
    frontier: list[ModelRecord]
    feature_frequency: list[int]
    feature_names: list[str]
    classifier_summary: dict[str, dict[str, float]]
    tau: float

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "frontier": [
                {"run": {"repeat": r.run[0], "fold": r.run[1]}, "train_error": r.train_error, "test_error": r.test_error, **r.to_dict()}
                for r in self.frontier
            ],
            "feature_frequency": dict(zip(self.feature_names, self.feature_frequency)),
            "classifier_summary": self.classifier_summary,
        }

    def top_feature_share(self, k: int) -> float:
        total = sum(self.feature_frequency)
        if total == 0:
            return 0.0
        return sum(sorted(self.feature_frequency, reverse=True)[:k]) / total


def mine(dump: ArchiveDump, tau: float = DEFAULT_TAU) -> MiningReport:
    front = frontier(dump.records, tau)
    names = dump.feature_names
    return MiningReport(front, feature_frequency(front, len(names)), names, classifier_summary(front), tau)
