"""Cardinality-constrained maximization.

Ties are always resolved toward the smallest index (or the lexicographically
smallest subset), which is what makes lazy and naive greedy agree exactly.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Selection
from .errors import BadBudget, NotSubmodular, TooLarge
from .objectives import Dispersion, floor_sentinel

MAX_COMBINATIONS = 10**6


@dataclass
class GreedyStats:
    gain_evaluations: int = 0
    resorts: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def mean_resorts(self) -> float:
        return float(np.mean(self.resorts)) if self.resorts else 0.0


def _check_budget(k, n, low=0):
    if not isinstance(k, (int, np.integer)) or k < low or k > n:
        raise BadBudget(f"budget must be an integer in [{low}, {n}], got {k}")


def naive_greedy(objective, k, stats: GreedyStats | None = None) -> Selection:
    """Re-evaluate every remaining candidate's gain at every step."""
    n = objective.n
    _check_budget(k, n)
    stats = stats if stats is not None else GreedyStats()
    t0 = time.perf_counter()
    state = objective.init_state()
    chosen = np.zeros(n, dtype=bool)
    sel = Selection(budget_k=k)
    for _ in range(k):
        cand = np.flatnonzero(~chosen)
        g = objective.gains(state, cand)
        stats.gain_evaluations += cand.size
        # argmax returns the first maximum and cand is ascending
        best = int(np.argmax(g))
        j = int(cand[best])
        objective.update(state, j)
        chosen[j] = True
        sel.order.append(j)
        sel.gains.append(float(g[best]))
        sel.values.append(objective.value(state))
        stats.resorts.append(0)
    stats.wall_time += time.perf_counter() - t0
    sel.stats = stats
    return sel


def lazy_greedy(objective, k, stats: GreedyStats | None = None) -> Selection:
    """Accelerated greedy over a max-heap of stale gain upper bounds.

    Heap keys are ``(-bound, index, iteration_computed)``. An element is taken
    when its refreshed key still sorts before the next heap top.
    """
    if not objective.submodular:
        raise NotSubmodular(
            f"lazy greedy needs a submodular objective; {objective.name} is not"
        )
    n = objective.n
    _check_budget(k, n)
    stats = stats if stats is not None else GreedyStats()
    t0 = time.perf_counter()
    state = objective.init_state()
    sel = Selection(budget_k=k)
    if k == 0:
        sel.stats = stats
        return sel

    g0 = objective.gains(state, np.arange(n))
    stats.gain_evaluations += n
    heap = [(-float(g), j, 0) for j, g in enumerate(g0)]
    heapq.heapify(heap)

    for t in range(k):
        resorts = 0
        while True:
            neg, j, stamp = heapq.heappop(heap)
            if stamp == t:
                g = -neg
            else:
                g = objective.gain(state, j)
                stats.gain_evaluations += 1
            if not heap or (-g, j) < heap[0][:2]:
                break
            heapq.heappush(heap, (-g, j, t))
            resorts += 1
        objective.update(state, j)
        sel.order.append(j)
        sel.gains.append(float(g))
        sel.values.append(objective.value(state))
        stats.resorts.append(resorts)
    stats.wall_time += time.perf_counter() - t0
    sel.stats = stats
    return sel


def dispersion_greedy(dist, k, seed="pair", stats: GreedyStats | None = None) -> Selection:
    """Max-min dispersion greedy (farthest-point insertion).

    ``seed="pair"`` starts from the globally farthest pair, which the
    1/2-approximation argument needs. ``seed="single"`` starts from element 0
    and is cheaper but carries no guarantee.
    """
    if seed not in ("pair", "single"):
        raise ValueError(f"unknown seeding rule {seed!r}")
    D = getattr(dist, "d", dist)
    if isinstance(dist, Dispersion):
        D = dist.D
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    _check_budget(k, n, low=2)
    stats = stats if stats is not None else GreedyStats()
    t0 = time.perf_counter()

    sel = Selection(budget_k=k)
    if seed == "pair":
        upper = np.where(np.triu(np.ones((n, n), dtype=bool), 1), D, -np.inf)
        flat = int(np.argmax(upper))
        a, b = divmod(flat, n)
        stats.gain_evaluations += n * (n - 1) // 2
        sel.order += [a, b]
        sel.values += [math.inf, float(D[a, b])]
        sel.gains += [0.0, float(D[a, b])]
        nearest = np.minimum(D[a], D[b])
        current = float(D[a, b])
    else:
        sel.order.append(0)
        sel.values.append(math.inf)
        sel.gains.append(0.0)
        nearest = D[0].copy()
        current = math.inf
    chosen = np.zeros(n, dtype=bool)
    chosen[sel.order] = True
    stats.resorts += [0] * len(sel.order)

    while len(sel.order) < k:
        # surrogate: max_j min_{i in X} d_ij, same argmax as the true gain
        masked = np.where(chosen, -np.inf, nearest)
        stats.gain_evaluations += int((~chosen).sum())
        j = int(np.argmax(masked))
        new = min(current, float(nearest[j]))
        sel.gains.append(float(nearest[j]) if math.isinf(current) else new - current)
        sel.values.append(new)
        sel.order.append(j)
        current = new
        chosen[j] = True
        np.minimum(nearest, D[j], out=nearest)
        stats.resorts.append(0)
    stats.wall_time += time.perf_counter() - t0
    sel.stats = stats
    return sel


def brute_force(objective, k, max_combinations=MAX_COMBINATIONS) -> Selection:
    """Exact maximizer by enumeration; ties go to the lexicographically first subset."""
    n = objective.n
    _check_budget(k, n)
    count = math.comb(n, k)
    if count > max_combinations:
        raise TooLarge(f"C({n},{k}) = {count} subsets exceeds the {max_combinations} limit")
    best, best_val = (), None
    for combo in itertools.combinations(range(n), k):
        v = floor_sentinel(objective.evaluate(combo)) if k >= 2 else objective.evaluate(combo)
        if best_val is None or v > best_val:
            best, best_val = combo, v
    sel = Selection(budget_k=k, empty_value=objective.evaluate(()))
    prev = floor_sentinel(sel.empty_value)
    for t in range(1, k + 1):
        v = objective.evaluate(best[:t])
        sel.order.append(best[t - 1])
        sel.values.append(v)
        sel.gains.append(floor_sentinel(v) - prev)
        prev = floor_sentinel(v)
    return sel
