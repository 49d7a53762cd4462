"""Run configuration: JSON file format with strict key validation."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .classifiers import ClassifierSpec
from .data import ExperimentSettings, NestedCvPlan
from .moea import MoeaParams
from .objectives import ObjectiveConfig

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "version": CONFIG_VERSION,
    "dataset": {
        "path": "builtin:wbc",
        "label_column": "class",
        "exclude_columns": [],
        "missing_policy": "drop",
    },
    "seed": 42,
    "moea": {"population": 100, "generations": 30, "archive_size": 100, "tournament_size": 2},
    "gp": {
        "max_depth_init": 5,
        "min_depth_init": 2,
        "max_depth": 12,
        "crossover_rate": 0.9,
        "mutation_rate": 0.1,
        "target_dims": 2,
    },
    "objectives": {
        "aggregation": "min",
        "inner_folds": 3,
        "bank": [
            {"kind": "gaussian_nb"},
            {"kind": "knn", "k": 1},
            {"kind": "logistic", "l2": 1e-4, "iters": 200, "lr": 0.1},
        ],
    },
    "cv": {"repeats": 2, "outer_folds": 5},
    "baselines": True,
    "output_dir": "mog3p-out",
}

PAPER_SCALE = {
    "moea": {"population": 400, "generations": 100, "archive_size": 100, "tournament_size": 2},
    "objectives": {"inner_folds": 10},
    "cv": {"repeats": 10, "outer_folds": 10},
}

BUILTIN_DATASETS = {
    "wbc": {"path": "builtin:wbc", "label_column": "class", "exclude_columns": ["id"], "missing_policy": "drop"},
    "crabs": {"path": "builtin:crabs", "label_column": "class", "exclude_columns": [], "missing_policy": "drop"},
}


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict) and key != "bank":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where}{key!r} must be an object")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, d: dict, paper_scale: bool = False) -> "RunConfig":
        if "version" in d and d["version"] != CONFIG_VERSION:
            raise ConfigError(f"config version {d['version']!r} is not supported (expected {CONFIG_VERSION})")
        base = _merge(DEFAULTS, PAPER_SCALE) if paper_scale else DEFAULTS
        cfg = cls(_merge(base, d))
        cfg.settings()  # validates values
        return cfg

    @classmethod
    def load(cls, path: str | Path, paper_scale: bool = False) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        cfg = cls.from_dict(doc, paper_scale)
        ds = cfg.raw["dataset"]
        if not ds["path"].startswith("builtin:") and not Path(ds["path"]).is_absolute():
            ds["path"] = str((path.parent / ds["path"]).resolve())
        return cfg

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)

    def config_hash(self) -> str:
        """Hash of everything that affects results; the output directory does not."""
        hashed = {k: v for k, v in self.raw.items() if k != "output_dir"}
        canon = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def with_overrides(self, **kwargs) -> "RunConfig":
        """Apply CLI-style overrides: seed, inner_folds, aggregation, output_dir."""
        d = self.to_dict()
        for key, value in kwargs.items():
            if value is None:
                continue
            if key in ("seed", "output_dir"):
                d[key] = value
            elif key in ("inner_folds", "aggregation"):
                d["objectives"][key] = value
            else:
                raise ConfigError(f"unknown override {key!r}")
        return RunConfig.from_dict(d)

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def settings(self) -> ExperimentSettings:
        r = self.raw
        try:
            if not isinstance(r["seed"], int) or r["seed"] < 0:
                raise ConfigError("seed must be a non-negative integer")
            objectives = ObjectiveConfig(
                aggregation=r["objectives"]["aggregation"],
                inner_folds=int(r["objectives"]["inner_folds"]),
                bank=tuple(ClassifierSpec.from_dict(b) for b in r["objectives"]["bank"]),
            )
            gp = dict(r["gp"])
            return ExperimentSettings(
                moea=MoeaParams(**r["moea"]),
                gp=gp,
                objectives=objectives,
                plan=NestedCvPlan(int(r["cv"]["repeats"]), int(r["cv"]["outer_folds"]), self.seed),
                baselines=bool(r["baselines"]),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
