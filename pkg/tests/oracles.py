"""Slow, loop-based reference implementations used as test oracles."""

import math

import numpy as np

from mog3p.gp_core import ExpressionTree, ProjectionModel, X
from mog3p.moea import Individual
from mog3p.objectives import FitnessVector


def brute_dominates(a, b):
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def brute_spea2(F):
    """Strength, raw, sigma_k, fitness and the distance matrix for objective rows ``F``."""
    n, m = len(F), len(F[0])
    lo = [min(r[j] for r in F) for j in range(m)]
    hi = [max(r[j] for r in F) for j in range(m)]
    N = [[(r[j] - lo[j]) / (hi[j] - lo[j]) if hi[j] > lo[j] else 0.0 for j in range(m)] for r in F]
    dist = [[math.sqrt(sum((N[i][j] - N[t][j]) ** 2 for j in range(m))) for t in range(n)] for i in range(n)]
    strength = [sum(brute_dominates(F[i], F[j]) for j in range(n)) for i in range(n)]
    raw = [sum(strength[j] for j in range(n) if brute_dominates(F[j], F[i])) for i in range(n)]
    k = int(math.floor(math.sqrt(n)))
    sigma = []
    for i in range(n):
        others = sorted(dist[i][t] for t in range(n) if t != i)
        sigma.append(others[min(k, n - 1) - 1] if others else 0.0)
    fitness = [raw[i] + 1.0 / (sigma[i] + 2.0) for i in range(n)]
    return strength, raw, sigma, fitness, dist


def brute_environmental(F, capacity):
    """Indices (into ``F``) of the selected archive, in archive order."""
    _, _, _, fitness, dist = brute_spea2(F)
    n = len(F)
    nd = [i for i in range(n) if fitness[i] < 1.0]
    if len(nd) <= capacity:
        rest = sorted((i for i in range(n) if fitness[i] >= 1.0), key=lambda i: (fitness[i], i))
        return nd + rest[: capacity - len(nd)]
    keep = list(nd)
    while len(keep) > capacity:
        profiles = [sorted(dist[i][j] for j in keep if j != i) for i in keep]
        worst = 0
        for pos in range(1, len(keep)):
            if profiles[pos] < profiles[worst]:
                worst = pos
        keep.pop(worst)
    return keep


def individuals(F):
    dummy = ProjectionModel((ExpressionTree(X(0)), ExpressionTree(X(0))))
    return [Individual(dummy, FitnessVector(float(r[0]), float(r[1]), r[2])) for r in F]


def random_objectives(rng, n):
    """Random 3-objective rows; some populations use a tiny integer grid to force ties."""
    if rng.random() < 0.5:
        rows = rng.integers(0, 4, size=(n, 3)).astype(float)
    else:
        rows = np.column_stack([rng.random(n), rng.exponential(size=n), rng.integers(2, 40, size=n)])
    return [(float(a), float(b), int(c)) for a, b, c in rows]


def brute_frontier(points):
    """Indices of non-dominated (train_error, size) pairs."""
    return [i for i, p in enumerate(points) if not any(brute_dominates(q, p) for q in points)]
