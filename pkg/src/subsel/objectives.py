"""Set-function objectives with memoized marginal gains.

Every objective exposes the same small surface used by the optimizers:

    state = f.init_state()
    f.gain(state, j)           # marginal gain of j given the cached state
    f.gains(state, candidates) # same, vectorized; bit-identical to gain()
    f.update(state, j)         # fold j into the state, in place
    f.value(state)             # f(X) for the X folded into the state
    f.evaluate(X)              # from scratch, no state

Dispersion is undefined below two elements and reports ``inf`` there. Where a
finite number is required (gains, mixtures, per-class sums) the sentinel is
read as 0, so the first pair's gain is the new minimum distance itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import AlreadySelected, BadWeights, IndexOutOfRange, MissingLabels
from .kernels import DistanceMatrix, SimilarityMatrix, SparseSimilarityGraph


def floor_sentinel(v: float) -> float:
    return 0.0 if math.isinf(v) else v


class OpCounter:
    """Counts matrix entries read; used to compare evaluation strategies."""

    def __init__(self):
        self.entries = 0

    def reset(self):
        self.entries = 0


def _as_index_array(X, n):
    idx = np.asarray(sorted(set(int(i) for i in X)), dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        bad = idx[0] if idx[0] < 0 else idx[-1]
        raise IndexOutOfRange(f"index {bad} outside ground set 0..{n - 1}")
    return idx


def _check_candidate(j, n, selected):
    if not 0 <= j < n:
        raise IndexOutOfRange(f"index {j} outside ground set 0..{n - 1}")
    if j in selected:
        raise AlreadySelected(f"element {j} is already in the set")


def _matrix(m):
    for attr in ("s", "d"):
        if hasattr(m, attr):
            return getattr(m, attr)
    return np.asarray(m, dtype=np.float64)


# ---------------------------------------------------------------------------
# Facility location
# ---------------------------------------------------------------------------


@dataclass
class FLPrecompute:
    """``maxes[i]`` = max similarity from i to the chosen set (0 when empty)."""

    maxes: np.ndarray
    selected: set = field(default_factory=set)


def fl_evaluate(sim, X) -> float:
    S = _matrix(sim)
    idx = _as_index_array(X, S.shape[0])
    if idx.size == 0:
        return 0.0
    return float(S[:, idx].max(axis=1).sum())


def _fl_gains(rows, maxes):
    # rows[c] holds s_{i, cand_c} for all i; reduction runs over the
    # contiguous axis so a single row sums exactly like a batch of them
    return (np.maximum(rows, maxes[None, :]) - maxes[None, :]).sum(axis=1)


def fl_gain(sim, precompute: FLPrecompute, j: int) -> float:
    S = _matrix(sim)
    _check_candidate(j, S.shape[0], precompute.selected)
    return float(_fl_gains(np.ascontiguousarray(S[:, [j]].T), precompute.maxes)[0])


def fl_update(precompute: FLPrecompute, sim, j: int) -> FLPrecompute:
    S = _matrix(sim)
    _check_candidate(j, S.shape[0], precompute.selected)
    np.maximum(precompute.maxes, S[:, j], out=precompute.maxes)
    precompute.selected.add(j)
    return precompute


class FacilityLocation:
    """f(X) = sum_i max_{j in X} s_ij over a dense similarity matrix."""

    name = "facility_location"
    submodular = True

    def __init__(self, sim):
        S = _matrix(sim)
        self.S = S
        self.n = S.shape[0]
        # column j as a contiguous row; free when S is symmetric
        self._cols = S if np.array_equal(S, S.T) else np.ascontiguousarray(S.T)
        self.counter = OpCounter()

    def evaluate(self, X) -> float:
        idx = _as_index_array(X, self.n)
        self.counter.entries += self.n * idx.size
        return fl_evaluate(self.S, idx)

    def init_state(self) -> FLPrecompute:
        return FLPrecompute(np.zeros(self.n))

    def gains(self, state, candidates) -> np.ndarray:
        cand = np.asarray(candidates, dtype=np.int64)
        self.counter.entries += self.n * cand.size
        return _fl_gains(self._cols[cand], state.maxes)

    def gain(self, state, j) -> float:
        _check_candidate(j, self.n, state.selected)
        return float(self.gains(state, [j])[0])

    def update(self, state, j):
        _check_candidate(j, self.n, state.selected)
        self.counter.entries += self.n
        np.maximum(state.maxes, self._cols[j], out=state.maxes)
        state.selected.add(j)
        return state

    def value(self, state) -> float:
        return float(state.maxes.sum())

    def restrict(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return FacilityLocation(self.S[np.ix_(idx, idx)])


def fl_evaluate_sparse(graph: SparseSimilarityGraph, X, include_self=True) -> float:
    """Facility location over stored edges only; missing edges count as 0.

    With ``include_self`` the implicit diagonal s_ii = 1 is honoured, which
    makes the g = n-1 graph agree with the dense function.
    """
    n = graph.n
    members = set(_as_index_array(X, n).tolist())
    total = 0.0
    for i in range(n):
        best = 1.0 if (include_self and i in members) else 0.0
        for j, s in zip(graph.neighbors[i].tolist(), graph.sims[i].tolist()):
            if j in members and s > best:
                best = s
        total += best
    return total


class SparseFacilityLocation:
    name = "facility_location_sparse"
    submodular = True

    def __init__(self, graph: SparseSimilarityGraph, include_self=True):
        n, g = graph.n, graph.g
        rows = np.repeat(np.arange(n), g)
        cols = graph.neighbors.ravel()
        vals = graph.sims.ravel()
        if include_self:
            rows = np.concatenate([rows, np.arange(n)])
            cols = np.concatenate([cols, np.arange(n)])
            vals = np.concatenate([vals, np.ones(n)])
        W = sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))
        W.sort_indices()
        self.graph = graph
        self.include_self = include_self
        self.W = W
        self.n = n
        self.counter = OpCounter()

    def evaluate(self, X) -> float:
        self.counter.entries += self.graph.g * self.n
        return fl_evaluate_sparse(self.graph, X, self.include_self)

    def init_state(self) -> FLPrecompute:
        return FLPrecompute(np.zeros(self.n))

    def _column(self, j):
        lo, hi = self.W.indptr[j], self.W.indptr[j + 1]
        return self.W.indices[lo:hi], self.W.data[lo:hi]

    def _gain(self, maxes, j):
        rows, vals = self._column(j)
        self.counter.entries += rows.size
        m = maxes[rows]
        return float((np.maximum(m, vals) - m).sum())

    def gains(self, state, candidates) -> np.ndarray:
        return np.array([self._gain(state.maxes, int(j)) for j in candidates])

    def gain(self, state, j) -> float:
        _check_candidate(j, self.n, state.selected)
        return self._gain(state.maxes, j)

    def update(self, state, j):
        _check_candidate(j, self.n, state.selected)
        rows, vals = self._column(j)
        self.counter.entries += rows.size
        state.maxes[rows] = np.maximum(state.maxes[rows], vals)
        state.selected.add(j)
        return state

    def value(self, state) -> float:
        return float(state.maxes.sum())


# ---------------------------------------------------------------------------
# Dispersion (disparity-min)
# ---------------------------------------------------------------------------


@dataclass
class DispPrecompute:
    """Current min pairwise distance plus each element's distance to X.

    ``nearest[j]`` = min_{k in X} d_kj lets a gain be read in O(1) once the
    O(n) update has been paid.
    """

    current_min: float
    nearest: np.ndarray
    selected: list = field(default_factory=list)


def disp_evaluate(dist, X) -> float:
    D = _matrix(dist)
    idx = _as_index_array(X, D.shape[0])
    if idx.size < 2:
        return math.inf
    sub = D[np.ix_(idx, idx)]
    iu = np.triu_indices(idx.size, 1)
    return float(sub[iu].min())


def _disp_gain_from(current_min, size, nearest_j):
    if size == 0:
        return 0.0
    if size == 1:
        return nearest_j
    return min(current_min, nearest_j) - current_min


def disp_gain(dist, precompute: DispPrecompute, j: int) -> float:
    D = _matrix(dist)
    _check_candidate(j, D.shape[0], set(precompute.selected))
    return float(
        _disp_gain_from(
            precompute.current_min, len(precompute.selected), precompute.nearest[j]
        )
    )


def disp_update(precompute: DispPrecompute, dist, j: int) -> DispPrecompute:
    D = _matrix(dist)
    _check_candidate(j, D.shape[0], set(precompute.selected))
    if precompute.selected:
        precompute.current_min = min(precompute.current_min, precompute.nearest[j])
    np.minimum(precompute.nearest, D[j], out=precompute.nearest)
    precompute.selected.append(j)
    return precompute


class Dispersion:
    """f(X) = min pairwise distance within X; not submodular."""

    name = "dispersion"
    submodular = False

    def __init__(self, dist):
        self.D = _matrix(dist)
        self.n = self.D.shape[0]
        self.counter = OpCounter()

    def evaluate(self, X) -> float:
        k = len(set(X))
        self.counter.entries += k * k
        return disp_evaluate(self.D, X)

    def init_state(self) -> DispPrecompute:
        return DispPrecompute(math.inf, np.full(self.n, math.inf))

    def gains(self, state, candidates) -> np.ndarray:
        cand = np.asarray(candidates, dtype=np.int64)
        self.counter.entries += cand.size
        size = len(state.selected)
        near = state.nearest[cand]
        if size == 0:
            return np.zeros(cand.size)
        if size == 1:
            return near.copy()
        return np.minimum(state.current_min, near) - state.current_min

    def gain(self, state, j) -> float:
        _check_candidate(j, self.n, set(state.selected))
        return float(self.gains(state, [j])[0])

    def update(self, state, j):
        self.counter.entries += self.n
        return disp_update(state, self.D, j)

    def value(self, state) -> float:
        return state.current_min

    def restrict(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return Dispersion(self.D[np.ix_(idx, idx)])


# ---------------------------------------------------------------------------
# Wrappers
# ---------------------------------------------------------------------------


class Modular:
    """f(X) = sum of fixed nonnegative weights. Gains never go stale."""

    name = "modular"
    submodular = True

    def __init__(self, weights):
        self.w = np.asarray(weights, dtype=np.float64)
        self.n = self.w.size
        self.counter = OpCounter()

    def evaluate(self, X):
        return float(self.w[_as_index_array(X, self.n)].sum())

    def init_state(self):
        return {"selected": set(), "total": 0.0}

    def gains(self, state, candidates):
        return self.w[np.asarray(candidates, dtype=np.int64)].copy()

    def gain(self, state, j):
        _check_candidate(j, self.n, state["selected"])
        return float(self.w[j])

    def update(self, state, j):
        _check_candidate(j, self.n, state["selected"])
        state["selected"].add(j)
        state["total"] += float(self.w[j])
        return state

    def value(self, state):
        return state["total"]


def label_aware_evaluate(objective, partition, X) -> float:
    """sum_c f_c(X & V_c), each f_c restricted to the ground set V_c.

    Computed from scratch by restricting ``objective`` to every class.
    """
    if partition is None:
        raise MissingLabels("label-aware objective needs a class partition")
    members = set(_as_index_array(X, objective.n).tolist())
    total = 0.0
    for cls in partition.classes:
        cls = list(cls)
        local = [p for p, i in enumerate(cls) if i in members]
        total += floor_sentinel(objective.restrict(cls).evaluate(local))
    return total


class LabelAware:
    """Per-class sum of an inner objective restricted to each class."""

    def __init__(self, objective, partition):
        if partition is None:
            raise MissingLabels("label-aware objective needs a class partition")
        self.base = objective
        self.partition = partition
        self.n = objective.n
        self.inner = [objective.restrict(list(c)) for c in partition.classes]
        self.cls = np.empty(self.n, dtype=np.int64)
        self.local = np.empty(self.n, dtype=np.int64)
        for c, members in enumerate(partition.classes):
            self.cls[list(members)] = c
            self.local[list(members)] = np.arange(len(members))
        self.submodular = objective.submodular
        self.name = f"label_aware({objective.name})"
        self.counter = OpCounter()

    def evaluate(self, X) -> float:
        return label_aware_evaluate(self.base, self.partition, X)

    def init_state(self):
        return {"inner": [f.init_state() for f in self.inner], "selected": set()}

    def gains(self, state, candidates) -> np.ndarray:
        cand = np.asarray(candidates, dtype=np.int64)
        out = np.empty(cand.size)
        cls = self.cls[cand]
        for c in np.unique(cls):
            mask = cls == c
            out[mask] = self.inner[c].gains(state["inner"][c], self.local[cand[mask]])
        self.counter.entries += sum(f.counter.entries for f in self.inner)
        for f in self.inner:
            f.counter.reset()
        return out

    def gain(self, state, j) -> float:
        _check_candidate(j, self.n, state["selected"])
        return float(self.gains(state, [j])[0])

    def update(self, state, j):
        _check_candidate(j, self.n, state["selected"])
        c = self.cls[j]
        self.inner[c].update(state["inner"][c], int(self.local[j]))
        state["selected"].add(j)
        return state

    def value(self, state) -> float:
        return float(
            sum(floor_sentinel(f.value(s)) for f, s in zip(self.inner, state["inner"]))
        )


class Mixture:
    """lam1 * representation + lam2 * dispersion (sentinel read as 0)."""

    name = "mixture"

    def __init__(self, representation, dispersion, lam1, lam2):
        if lam1 < 0 or lam2 < 0 or (lam1 == 0 and lam2 == 0):
            raise BadWeights(f"weights must be >= 0 and not both 0, got {lam1}, {lam2}")
        if representation.n != dispersion.n:
            raise BadWeights("mixture components disagree on ground set size")
        self.rep = representation
        self.disp = dispersion
        self.lam1 = float(lam1)
        self.lam2 = float(lam2)
        self.n = representation.n
        self.submodular = self.lam2 == 0 and representation.submodular
        self.counter = OpCounter()

    def evaluate(self, X) -> float:
        return self.lam1 * self.rep.evaluate(X) + self.lam2 * floor_sentinel(
            self.disp.evaluate(X)
        )

    def init_state(self):
        return (self.rep.init_state(), self.disp.init_state())

    def gains(self, state, candidates) -> np.ndarray:
        return self.lam1 * self.rep.gains(state[0], candidates) + self.lam2 * self.disp.gains(
            state[1], candidates
        )

    def gain(self, state, j) -> float:
        return mixture_gain(self, state, j)

    def update(self, state, j):
        self.rep.update(state[0], j)
        self.disp.update(state[1], j)
        return state

    def value(self, state) -> float:
        return self.lam1 * self.rep.value(state[0]) + self.lam2 * floor_sentinel(
            self.disp.value(state[1])
        )


def mixture_gain(objective: Mixture, state, j) -> float:
    return float(
        objective.lam1 * objective.rep.gain(state[0], j)
        + objective.lam2 * objective.disp.gain(state[1], j)
    )
