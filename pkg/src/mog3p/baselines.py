"""Linear and metric baselines: PCA, classical MDS and Fisher's multiple discriminants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


def jacobi_eigh(A: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns eigenvalues in descending order and the matching eigenvectors as
    columns. Sweeps stop when the off-diagonal Frobenius norm drops below
    ``tol`` times the matrix norm.
    """
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    out = vectors.copy()
    for i, row in enumerate(out):
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            out[i] = -row
    return out


@dataclass
class LinearProjection:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    padded: bool = False

    def apply(self, X: np.ndarray) -> np.ndarray:
        return apply(self, X)


@dataclass
class EmbeddingResult:
    coords: np.ndarray
    eigenvalues: np.ndarray


def apply(proj: LinearProjection, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != proj.mean.shape[0]:
        raise ValueError(f"expected {proj.mean.shape[0]} features")
    return (X - proj.mean) @ proj.components.T


def pca_fit(X: np.ndarray, n_components: int = 2) -> LinearProjection:
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2 or d < n_components:
        raise ValueError("PCA needs n >= 2 and at least n_components features")
    mean = X.mean(axis=0)
    C = (X - mean).T @ (X - mean) / (n - 1)
    w, V = jacobi_eigh(C)
    return LinearProjection(mean, _fix_sign(V[:, :n_components].T), w[:n_components])


def mds_fit(X: np.ndarray, n_components: int = 2) -> EmbeddingResult:
    """Classical (Torgerson) scaling of Euclidean distances."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 3:
        raise ValueError("MDS needs at least 3 points")
    sq = (X * X).sum(axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(D2, 0.0)
    return mds_from_distances(D2, n_components, squared=True)


def double_center(D2: np.ndarray) -> np.ndarray:
    row = D2.mean(axis=1, keepdims=True)
    col = D2.mean(axis=0, keepdims=True)
    return -0.5 * (D2 - row - col + D2.mean())


def mds_from_distances(D: np.ndarray, n_components: int = 2, squared: bool = False) -> EmbeddingResult:
    D2 = np.asarray(D, dtype=float)
    if not squared:
        D2 = D2 * D2
    B = double_center(D2)
    # n x n problem: LAPACK instead of the O(n^3)-per-sweep Python Jacobi
    w, V = np.linalg.eigh(0.5 * (B + B.T))
    order = np.argsort(-w, kind="stable")[:n_components]
    w, V = w[order], V[:, order]
    V = _fix_sign(V.T).T
    coords = V * np.sqrt(np.maximum(w, 0.0))
    return EmbeddingResult(coords, w)


def scatter_matrices(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    mu = X.mean(axis=0)
    d = X.shape[1]
    W = np.zeros((d, d))
    B = np.zeros((d, d))
    for c in np.unique(y):
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        W += (Xc - mc).T @ (Xc - mc)
        B += Xc.shape[0] * np.outer(mc - mu, mc - mu)
    return W, B


def mda_fit(X: np.ndarray, y: np.ndarray, n_components: int = 2) -> LinearProjection:
    """Fisher discriminant directions from B v = lambda W v (W lightly regularized).

    The generalized problem is reduced with the Cholesky factor L of W to the
    symmetric problem L^-1 B L^-T u = lambda u, v = L^-T u.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n_classes = np.unique(y).size
    if n_classes < 2:
        raise ValueError("MDA needs at least two classes")
    d = X.shape[1]
    W, B = scatter_matrices(X, y)
    W = W + 1e-6 * np.trace(W) / d * np.eye(d)
    if np.trace(W) <= 0:
        W = W + np.eye(d)
    L = np.linalg.cholesky(W)
    Linv = np.linalg.inv(L)
    M = Linv @ B @ Linv.T
    w, U = jacobi_eigh(M)
    Vg = Linv.T @ U[:, :n_components]
    Vg /= np.linalg.norm(Vg, axis=0, keepdims=True)
    return LinearProjection(
        X.mean(axis=0),
        _fix_sign(Vg.T),
        w[:n_components],
        padded=n_components > n_classes - 1,
    )
