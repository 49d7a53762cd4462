"""Dataset loading, standardization and the nested cross-validation harness."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baselines
from .classifiers import ClassifierSpec, accuracy, stratified_folds
from .gp_core import GpParams, ProjectionModel, project, to_infix
from .moea import EvolutionResult, MoeaParams, run_evolution
from .objectives import FitnessVector, ModelEvaluator, ObjectiveConfig

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "?", "NA", "NaN", "nan", "null"})
STD_FLOOR = 1e-9
BUILTIN_DIR = Path(__file__).parent / "datasets"


class DataError(ValueError):
    pass


class UnknownColumnError(DataError):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    class_names: list[str]
    name: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DataError("X must be n x d with one label per row")
        if self.X.shape[1] != len(self.feature_names):
            raise DataError("feature name count does not match X")
        if not np.all(np.isfinite(self.X)):
            raise DataError("dataset contains non-finite values")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= len(self.class_names)):
            raise DataError("labels out of range for class names")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.class_names, self.name)

    def with_X(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, self.y, self.feature_names, self.class_names, self.name)


def _column_index(header: list[str], col: str | int, what: str) -> int:
    if isinstance(col, int) or (isinstance(col, str) and col.lstrip("-").isdigit() and col not in header):
        i = int(col)
        if not -len(header) <= i < len(header):
            raise UnknownColumnError(f"{what} column index {i} out of range")
        return i % len(header)
    if col not in header:
        raise UnknownColumnError(f"{what} column {col!r} not found in header {header}")
    return header.index(col)


def load_csv(
    path: str | Path,
    label_column: str | int = -1,
    exclude_columns: Sequence[str | int] = (),
    missing_policy: str = "drop",
) -> Dataset:
    """Read a headed CSV into a Dataset.

    Labels are factorized in order of first appearance. With
    ``missing_policy="drop"`` rows holding a missing marker (empty, ``?``,
    ``NA``) are dropped; ``"strict"`` rejects them.
    """
    if missing_policy not in ("drop", "strict"):
        raise ValueError(f"unknown missing policy {missing_policy!r}")
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        label_idx = _column_index(header, label_column, "label")
        excluded = {_column_index(header, c, "excluded") for c in exclude_columns}
        excluded.add(label_idx)
        feat_idx = [i for i in range(len(header)) if i not in excluded]
        rows, labels = [], []
        dropped = 0
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            cells = [row[i].strip() for i in feat_idx]
            label = row[label_idx].strip()
            if label in MISSING_TOKENS or any(c in MISSING_TOKENS for c in cells):
                if missing_policy == "strict":
                    raise DataError(f"{path}:{line_no}: missing value")
                dropped += 1
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                bad = next(c for c in cells if not _is_float(c))
                raise DataError(f"{path}:{line_no}: non-numeric feature value {bad!r}") from None
            rows.append(values)
            labels.append(label)
    if dropped:
        log.info("dropped %d rows with missing values from %s", dropped, path)
    if not rows:
        raise DataError(f"{path} has no usable rows")
    class_names: list[str] = []
    lookup: dict[str, int] = {}
    y = []
    for lab in labels:
        if lab not in lookup:
            lookup[lab] = len(class_names)
            class_names.append(lab)
        y.append(lookup[lab])
    return Dataset(np.array(rows), np.array(y), [header[i] for i in feat_idx], class_names, path.stem)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_builtin(name: str) -> Dataset:
    """Bundled benchmark data: ``wbc`` (UCI breast-cancer-wisconsin) or ``crabs``."""
    if name == "wbc":
        return load_csv(BUILTIN_DIR / "wbc.csv", "class", ["id"], "drop")
    if name == "crabs":
        return load_csv(BUILTIN_DIR / "crabs.csv", "class")
    raise DataError(f"unknown builtin dataset {name!r}")


@dataclass
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        if X.shape[0] == 0:
            raise DataError("cannot standardize an empty partition")
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > STD_FLOOR, std, 1.0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.stds


def standardize_fit_transform(train: Dataset) -> tuple[Standardizer, Dataset]:
    s = Standardizer.fit(train.X)
    return s, train.with_X(s.transform(train.X))


def standardize_apply(s: Standardizer, other: Dataset) -> Dataset:
    return other.with_X(s.transform(other.X))


# ---------------------------------------------------------------------------
# nested cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NestedCvPlan:
    repeats: int = 10
    outer_folds: int = 10
    seed: int = 0

    def outer_assignment(self, y: np.ndarray, repeat: int) -> np.ndarray:
        return stratified_folds(y, self.outer_folds, np.random.default_rng([self.seed, repeat]))


@dataclass(frozen=True)
class ExperimentSettings:
    moea: MoeaParams
    gp: dict  # GpParams fields other than n_features
    objectives: ObjectiveConfig
    plan: NestedCvPlan
    baselines: bool = True

    def gp_params(self, n_features: int) -> GpParams:
        return GpParams(n_features=n_features, **self.gp)


@dataclass
class ModelRecord:
    expressions: list[str]
    objectives: FitnessVector
    per_classifier: list[tuple[str, float, float]]  # (name, train acc, test acc)
    run: tuple[int, int]
    features_used: list[int]

    @property
    def train_error(self) -> float:
        return 1.0 - float(np.mean([tr for _, tr, _ in self.per_classifier]))

    @property
    def test_error(self) -> float:
        return 1.0 - float(np.mean([te for _, _, te in self.per_classifier]))

    def to_dict(self) -> dict:
        return {
            "expressions": list(self.expressions),
            "objectives": {
                "c_error": self.objectives.c_error,
                "v_index": self.objectives.v_index,
                "s_size": self.objectives.s_size,
            },
            "per_classifier": [
                {"name": n, "train_accuracy": tr, "test_accuracy": te} for n, tr, te in self.per_classifier
            ],
            "features_used": list(self.features_used),
        }

    @classmethod
    def from_dict(cls, d: dict, run: tuple[int, int]) -> "ModelRecord":
        o = d["objectives"]
        return cls(
            expressions=list(d["expressions"]),
            objectives=FitnessVector(float(o["c_error"]), float(o["v_index"]), int(o["s_size"])),
            per_classifier=[(p["name"], float(p["train_accuracy"]), float(p["test_accuracy"])) for p in d["per_classifier"]],
            run=run,
            features_used=sorted(int(i) for i in d["features_used"]),
        )


@dataclass
class RunResult:
    repeat: int
    fold: int
    standardizer: Standardizer
    records: list[ModelRecord]
    report_index: int
    history: list
    baseline_acc: dict[str, list[float]] = field(default_factory=dict)  # method -> per classifier

    @property
    def report_model(self) -> ModelRecord:
        return self.records[self.report_index]


def run_seed(seed: int, repeat: int, fold: int, stream: int) -> list[int]:
    return [seed, repeat, fold, stream]


def select_report_model(records: Sequence[ModelRecord]) -> int:
    """Lowest training c_error, then smaller size, then smaller separation index."""
    keyed = [(r.objectives.c_error, r.objectives.s_size, r.objectives.v_index, i) for i, r in enumerate(records)]
    return min(keyed)[3]


def bank_test_accuracies(bank: Sequence[ClassifierSpec], Ztr, ytr, Zte, yte, n_classes: int) -> list[float]:
    return [accuracy(spec, Ztr, ytr, Zte, yte, n_classes=n_classes) for spec in bank]


def baseline_accuracies(
    dataset: Dataset, train_idx: np.ndarray, test_idx: np.ndarray, std: Standardizer, bank: Sequence[ClassifierSpec]
) -> dict[str, list[float]]:
    """Bank test accuracy on raw features and on the three 2-D baselines for one split.

    PCA and MDA are fitted on the training rows only; MDS has no out-of-sample
    mapping, so it embeds all rows (labels unused) and the split is applied after.
    """
    Z = std.transform(dataset.X)
    y, K = dataset.y, dataset.n_classes
    ytr, yte = y[train_idx], y[test_idx]
    out = {"All": bank_test_accuracies(bank, Z[train_idx], ytr, Z[test_idx], yte, K)}
    pca = baselines.pca_fit(Z[train_idx])
    out["PCA"] = bank_test_accuracies(bank, pca.apply(Z[train_idx]), ytr, pca.apply(Z[test_idx]), yte, K)
    emb = baselines.mds_fit(Z).coords
    out["MDS"] = bank_test_accuracies(bank, emb[train_idx], ytr, emb[test_idx], yte, K)
    mda = baselines.mda_fit(Z[train_idx], ytr)
    out["MDA"] = bank_test_accuracies(bank, mda.apply(Z[train_idx]), ytr, mda.apply(Z[test_idx]), yte, K)
    return out


def run_outer_fold(dataset: Dataset, settings: ExperimentSettings, repeat: int, fold: int, fold_of: np.ndarray) -> RunResult:
    seed = settings.plan.seed
    train_idx = np.flatnonzero(fold_of != fold)
    test_idx = np.flatnonzero(fold_of == fold)
    assert np.intersect1d(train_idx, test_idx).size == 0, "held-out rows leaked into the training partition"
    std = Standardizer.fit(dataset.X[train_idx])
    Xtr = std.transform(dataset.X[train_idx])
    Xte = std.transform(dataset.X[test_idx])
    ytr, yte = dataset.y[train_idx], dataset.y[test_idx]
    evaluator = ModelEvaluator(Xtr, ytr, settings.objectives, run_seed(seed, repeat, fold, 1))
    gp = settings.gp_params(dataset.n_features)
    result: EvolutionResult = run_evolution(
        evaluator, settings.moea, gp, np.random.default_rng(run_seed(seed, repeat, fold, 2))
    )
    bank = settings.objectives.bank
    names = dataset.feature_names
    records: list[ModelRecord] = []
    seen: set = set()
    for ind in result.archive:
        key = tuple(t.root for t in ind.model.trees)
        if key in seen:
            continue
        seen.add(key)
        test_acc = bank_test_accuracies(
            bank, project(ind.model, Xtr), ytr, project(ind.model, Xte), yte, dataset.n_classes
        )
        records.append(
            ModelRecord(
                expressions=[to_infix(t, names) for t in ind.model.trees],
                objectives=ind.fitness,
                per_classifier=[(s.name, tr, te) for s, tr, te in zip(bank, ind.accuracies, test_acc)],
                run=(repeat, fold),
                features_used=sorted(ind.model.variables()),
            )
        )
    base = baseline_accuracies(dataset, train_idx, test_idx, std, bank) if settings.baselines else {}
    log.info("run repeat=%d fold=%d done: %d archive models", repeat, fold, len(records))
    return RunResult(repeat, fold, std, records, select_report_model(records), result.history, base)


def _run_task(args) -> RunResult:
    return run_outer_fold(*args)


@dataclass
class ExperimentReport:
    classifier_names: list[str]
    runs: list[RunResult]

    def method_accuracies(self) -> dict[str, np.ndarray]:
        """method -> runs x classifiers matrix of held-out accuracies."""
        out = {"MOG3P": np.array([[te for _, _, te in r.report_model.per_classifier] for r in self.runs])}
        if self.runs and self.runs[0].baseline_acc:
            for m in self.runs[0].baseline_acc:
                out[m] = np.array([r.baseline_acc[m] for r in self.runs])
        return out

    def summary(self) -> dict[str, dict[str, tuple[float, float]]]:
        """method -> classifier (and 'Avg') -> (mean, std) over runs."""
        out = {}
        for method, A in self.method_accuracies().items():
            row = {}
            for j, name in enumerate(self.classifier_names):
                row[name] = (float(A[:, j].mean()), _std(A[:, j]))
            row["Avg"] = (float(A.mean()), _std(A.ravel()))
            out[method] = row
        return out

    def mean_test_accuracy(self, method: str = "MOG3P") -> float:
        return float(self.method_accuracies()[method].mean())


def _std(v: np.ndarray) -> float:
    return float(np.std(v, ddof=1)) if v.size > 1 else 0.0


def run_nested_experiment(dataset: Dataset, settings: ExperimentSettings, n_jobs: int = 1) -> ExperimentReport:
    plan = settings.plan
    tasks = []
    for r in range(plan.repeats):
        fold_of = plan.outer_assignment(dataset.y, r)
        for f in range(plan.outer_folds):
            tasks.append((dataset, settings, r, f, fold_of))
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            runs = list(pool.map(_run_task, tasks))
    else:
        runs = [_run_task(t) for t in tasks]
    return ExperimentReport([s.name for s in settings.objectives.bank], runs)


def report_model_projection(dataset: Dataset, run: RunResult) -> tuple[ProjectionModel, np.ndarray]:
    from .gp_core import parse_infix

    trees = tuple(parse_infix(e, dataset.feature_names) for e in run.report_model.expressions)
    model = ProjectionModel(trees)
    return model, project(model, run.standardizer.transform(dataset.X))
