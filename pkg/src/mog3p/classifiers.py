"""Small classifier bank and stratified cross-validation.

Every classifier standardizes its inputs with statistics of the data it was
trained on, so callers can pass raw projections of any scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numba
import numpy as np

VAR_FLOOR = 1e-9
STD_FLOOR = 1e-9


class ClassifierError(ValueError):
    pass


class StratificationError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str  # "gaussian_nb" | "knn" | "logistic"
    k: int = 1
    l2: float = 1e-4
    iters: int = 200
    lr: float = 0.1

    def __post_init__(self):
        if self.kind not in ("gaussian_nb", "knn", "logistic"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.k < 1 or self.l2 < 0 or self.iters < 1 or self.lr <= 0:
            raise ValueError(f"classifier parameters out of range: {self}")

    @property
    def name(self) -> str:
        if self.kind == "knn":
            return f"{self.k}-NN"
        return {"gaussian_nb": "NaiveBayes", "logistic": "Logistic"}[self.kind]

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "knn":
            return {"kind": "knn", "k": self.k}
        if self.kind == "logistic":
            return {"kind": "logistic", "l2": self.l2, "iters": self.iters, "lr": self.lr}
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ClassifierSpec":
        allowed = {"gaussian_nb": {"kind"}, "knn": {"kind", "k"}, "logistic": {"kind", "l2", "iters", "lr"}}
        kind = d.get("kind")
        if kind not in allowed:
            raise ValueError(f"unknown classifier kind {kind!r}")
        extra = set(d) - allowed[kind]
        if extra:
            raise ValueError(f"unknown keys for {kind}: {sorted(extra)}")
        return cls(**d)


DEFAULT_BANK = (
    ClassifierSpec("gaussian_nb"),
    ClassifierSpec("knn", k=1),
    ClassifierSpec("logistic"),
)


@dataclass
class TrainedClassifier:
    spec: ClassifierSpec
    mean: np.ndarray
    scale: np.ndarray
    n_classes: int
    params: dict[str, np.ndarray]

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]


def _scaler(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # divide by max |x| first so squares of values near 1e150 do not overflow
    mag = np.max(np.abs(X), axis=0)
    mag = np.where(mag > 0, mag, 1.0)
    Z = X / mag
    mean = Z.mean(axis=0)
    std = Z.std(axis=0)
    std = np.where(std > STD_FLOOR, std, 1.0)
    return mean * mag, std * mag


def _standardize(clf_mean: np.ndarray, clf_scale: np.ndarray, X: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        Z = (X - clf_mean) / clf_scale
    return np.where(np.isfinite(Z), Z, 0.0)


def train(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, n_classes: int | None = None) -> TrainedClassifier:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ClassifierError("X must be n x d and match len(y)")
    if X.shape[0] < 2 or np.unique(y).size < 2:
        raise ClassifierError("training needs at least two samples from two classes")
    K = int(y.max()) + 1 if n_classes is None else n_classes
    mean, scale = _scaler(X)
    Z = _standardize(mean, scale, X)
    if spec.kind == "gaussian_nb":
        params = _fit_nb(Z, y, K)
    elif spec.kind == "knn":
        params = {"X": Z, "y": y}
    else:
        params = _fit_logistic(Z, y, K, spec)
    return TrainedClassifier(spec, mean, scale, K, params)


def _fit_nb(Z: np.ndarray, y: np.ndarray, K: int) -> dict[str, np.ndarray]:
    d = Z.shape[1]
    counts = np.bincount(y, minlength=K).astype(float)
    means = np.zeros((K, d))
    var = np.ones((K, d))
    for c in range(K):
        if counts[c] > 0:
            Zc = Z[y == c]
            means[c] = Zc.mean(axis=0)
            var[c] = Zc.var(axis=0)
    var = np.maximum(var, VAR_FLOOR)
    with np.errstate(divide="ignore"):
        log_prior = np.log(counts / counts.sum())
    return {"log_prior": log_prior, "means": means, "var": var}


def _fit_logistic(Z: np.ndarray, y: np.ndarray, K: int, spec: ClassifierSpec) -> dict[str, np.ndarray]:
    A = np.hstack([Z, np.ones((Z.shape[0], 1))])
    W = _logistic_gd(A, y, K, spec.iters, spec.lr, spec.l2)
    return {"W": W}


@numba.njit(cache=True)
def _logistic_gd(A, y, K, iters, lr, l2):
    # full-batch gradient descent on mean multinomial cross-entropy + l2 (bias unpenalized)
    n, d = A.shape
    W = np.zeros((d, K))
    G = np.empty((d, K))
    P = np.empty(K)
    for _ in range(iters):
        G[:] = 0.0
        for i in range(n):
            top = -np.inf
            for k in range(K):
                s = 0.0
                for j in range(d):
                    s += A[i, j] * W[j, k]
                P[k] = s
                if s > top:
                    top = s
            total = 0.0
            for k in range(K):
                P[k] = np.exp(P[k] - top)
                total += P[k]
            for k in range(K):
                r = P[k] / total
                if y[i] == k:
                    r -= 1.0
                for j in range(d):
                    G[j, k] += A[i, j] * r
        for j in range(d):
            pen = l2 if j < d - 1 else 0.0
            for k in range(K):
                W[j, k] -= lr * (G[j, k] / n + pen * W[j, k])
    return W


@numba.njit(cache=True)
def _nearest_index(Q, T):
    # first minimum wins, so ties go to the lower training row
    out = np.empty(Q.shape[0], dtype=np.int64)
    for i in range(Q.shape[0]):
        best = np.inf
        arg = 0
        for t in range(T.shape[0]):
            s = 0.0
            for j in range(Q.shape[1]):
                diff = Q[i, j] - T[t, j]
                s += diff * diff
            if s < best:
                best = s
                arg = t
        out[i] = arg
    return out


def decision_scores(model: TrainedClassifier, X: np.ndarray) -> np.ndarray:
    """Per-class scores (higher is better); knn returns vote counts."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ClassifierError(
            f"expected {model.n_features} features, got {X.shape[1] if X.ndim == 2 else X.shape}"
        )
    Z = _standardize(model.mean, model.scale, X)
    p = model.params
    kind = model.spec.kind
    if kind == "gaussian_nb":
        diff = Z[:, None, :] - p["means"][None, :, :]
        with np.errstate(over="ignore", invalid="ignore"):
            ll = -0.5 * (np.log(2 * np.pi * p["var"])[None] + diff**2 / p["var"][None]).sum(axis=2)
        # an overflowed log-likelihood is simply the least likely class
        ll = np.where(np.isfinite(ll), ll, -np.inf)
        return ll + p["log_prior"][None, :]
    if kind == "logistic":
        return np.hstack([Z, np.ones((Z.shape[0], 1))]) @ p["W"]
    Xt, yt = p["X"], p["y"]
    k = min(model.spec.k, Xt.shape[0])
    if k == 1:
        nearest = _nearest_index(Z, Xt)[:, None]
    else:
        d2 = ((Z[:, None, :] - Xt[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    votes = np.zeros((Z.shape[0], model.n_classes))
    np.add.at(votes, (np.arange(Z.shape[0])[:, None], yt[nearest]), 1.0)
    return votes


def predict(model: TrainedClassifier, X: np.ndarray) -> np.ndarray:
    # argmax returns the first maximum, i.e. the smallest class id on ties
    return np.argmax(decision_scores(model, X), axis=1)


def stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per sample: shuffle within each class, then deal round-robin."""
    y = np.asarray(y, dtype=np.int64)
    if k < 2:
        raise StratificationError("need at least 2 folds")
    classes, counts = np.unique(y, return_counts=True)
    small = classes[counts < k]
    if small.size:
        raise StratificationError(
            f"class(es) {small.tolist()} have fewer than {k} members"
        )
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    offset = 0
    for c in classes:
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        # continue dealing where the previous class stopped so fold sizes stay level
        fold_of[idx] = (np.arange(idx.size) + offset) % k
        offset = (offset + idx.size) % k
    return fold_of


def cv_predictions(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, fold_of: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if fold_of.shape[0] != y.shape[0]:
        raise ValueError("fold plan length differs from the number of samples")
    K = int(y.max()) + 1
    out = np.empty_like(y)
    for f in np.unique(fold_of):
        test = fold_of == f
        model = train(spec, X[~test], y[~test], n_classes=K)
        out[test] = predict(model, X[test])
    return out


def cv_accuracy(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, fold_of: np.ndarray) -> float:
    """Pooled accuracy: correct predictions over all folds divided by n."""
    pred = cv_predictions(spec, X, y, fold_of)
    return float(np.mean(pred == np.asarray(y)))


def accuracy(spec: ClassifierSpec, X_train, y_train, X_test, y_test, n_classes: int | None = None) -> float:
    model = train(spec, X_train, y_train, n_classes=n_classes)
    return float(np.mean(predict(model, X_test) == np.asarray(y_test)))
