"""Pairwise similarity and distance structures.

Dense matrices are built in fixed row blocks. Worker threads only decide
which block is computed when, so the result is bit-identical for any
``threads`` value.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    BadNeighborCount,
    MemoryBudgetExceeded,
    NonPositiveGamma,
    ZeroNormRow,
)

BLOCK_ROWS = 256
DEFAULT_MEMORY_BUDGET = 2 * 1024**3


def _features(data):
    return np.asarray(getattr(data, "features", data), dtype=np.float64)


def _check_budget(n, memory_budget):
    need = 8 * n * n
    if memory_budget is not None and need > memory_budget:
        raise MemoryBudgetExceeded(
            f"dense {n}x{n} matrix needs {need} bytes, budget is {memory_budget}; "
            "use the sparse nearest-neighbor path or raise the budget"
        )


def _blocked(n, fill, threads):
    starts = range(0, n, BLOCK_ROWS)
    if threads and threads > 1 and n > BLOCK_ROWS:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for s in starts:
            fill(s)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    s: np.ndarray
    kernel: str = "cosine"

    @property
    def n(self):
        return self.s.shape[0]


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    d: np.ndarray

    @property
    def n(self):
        return self.d.shape[0]


def _freeze(a):
    a.setflags(write=False)
    return a


def cosine_similarity(data, threads=1, memory_budget=DEFAULT_MEMORY_BUDGET):
    """Cosine similarity rescaled from [-1, 1] to [0, 1] as (1 + cos) / 2."""
    X = _features(data)
    n = X.shape[0]
    norms = np.sqrt(np.einsum("ij,ij->i", X, X))
    zero = np.nonzero(norms == 0)[0]
    if zero.size:
        raise ZeroNormRow(int(zero[0]))
    _check_budget(n, memory_budget)
    Xn = X / norms[:, None]
    G = np.empty((n, n))

    def fill(start):
        stop = min(start + BLOCK_ROWS, n)
        G[start:stop] = Xn[start:stop] @ Xn.T

    _blocked(n, fill, threads)
    S = 0.5 * (1.0 + G)
    S = 0.5 * (S + S.T)
    # roundoff only: the rescaling already maps into [0, 1]
    np.clip(S, 0.0, 1.0, out=S)
    np.fill_diagonal(S, 1.0)
    return SimilarityMatrix(_freeze(S), "cosine")


def euclidean_distance(data, threads=1, memory_budget=DEFAULT_MEMORY_BUDGET):
    X = _features(data)
    n = X.shape[0]
    _check_budget(n, memory_budget)
    D = np.empty((n, n))

    def fill(start):
        stop = min(start + BLOCK_ROWS, n)
        D[start:stop] = cdist(X[start:stop], X, metric="euclidean")

    _blocked(n, fill, threads)
    np.fill_diagonal(D, 0.0)
    return DistanceMatrix(_freeze(D))


def rbf_similarity(dist: DistanceMatrix, gamma: float) -> SimilarityMatrix:
    if not gamma > 0:
        raise NonPositiveGamma(f"gamma must be positive, got {gamma}")
    S = np.exp(-gamma * dist.d**2)
    np.fill_diagonal(S, 1.0)
    return SimilarityMatrix(_freeze(S), "rbf")


def median_heuristic_gamma(dist: DistanceMatrix) -> float:
    """1 / median of squared off-diagonal distances; 1.0 when degenerate."""
    n = dist.n
    if n < 2:
        return 1.0
    iu = np.triu_indices(n, 1)
    med = float(np.median(dist.d[iu] ** 2))
    return 1.0 / med if med > 0 else 1.0


@dataclass(frozen=True, eq=False)
class SparseSimilarityGraph:
    """Top-g neighbor lists per row, sorted by descending similarity.

    ``neighbors[i]`` and ``sims[i]`` are aligned length-g arrays. Self-loops
    are never stored.
    """

    neighbors: np.ndarray
    sims: np.ndarray

    @property
    def n(self):
        return self.neighbors.shape[0]

    @property
    def g(self):
        return self.neighbors.shape[1]

    def row(self, i):
        return list(zip(self.neighbors[i].tolist(), self.sims[i].tolist()))

    def edges(self):
        return {
            (i, int(j))
            for i in range(self.n)
            for j in self.neighbors[i]
        }


def knn_sparsify(sim: SimilarityMatrix, g: int) -> SparseSimilarityGraph:
    """Keep each row's g largest off-diagonal similarities.

    Ties go to the smaller column index.
    """
    S = sim.s
    n = S.shape[0]
    if not (isinstance(g, (int, np.integer)) and 1 <= g <= n - 1):
        raise BadNeighborCount(f"need 1 <= g <= n-1 = {n - 1}, got {g}")
    neighbors = np.empty((n, g), dtype=np.int64)
    sims = np.empty((n, g))
    cols = np.arange(n)
    for i in range(n):
        others = cols[cols != i]
        vals = S[i, others]
        # stable sort on the negated row keeps ascending index among ties
        order = np.argsort(-vals, kind="stable")[:g]
        neighbors[i] = others[order]
        sims[i] = vals[order]
    return SparseSimilarityGraph(_freeze(neighbors), _freeze(sims))
