"""Uncertainty sampling, small classifiers, and the filtered submodular loop.

Each round: train on the labeled pool, score the unlabeled pool by
uncertainty, keep the most uncertain beta percent (plus exact ties with the
last one kept), then pick a fixed-size batch from that filtered set with a
facility-location or dispersion objective built over the filtered items only.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial.distance import cdist

from . import kernels
from .data import (
    STREAM_RANDOM_ARM,
    STREAM_SEEDING,
    FeatureDataset,
    make_rng,
)
from .errors import (
    BadK,
    ConfigInvalid,
    EmptyPool,
    EmptyTrainingSet,
    InvalidSimplex,
    MissingLabels,
    SingleClassPool,
)
from .objectives import FacilityLocation
from .optimizer import dispersion_greedy, lazy_greedy

log = logging.getLogger(__name__)

MEASURES = ("least_confidence", "margin", "entropy")


# ---------------------------------------------------------------------------
# Uncertainty
# ---------------------------------------------------------------------------


def _check_simplex(P):
    if P.ndim != 2 or P.shape[1] == 0:
        raise InvalidSimplex(f"expected probability rows, got shape {P.shape}")
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        raise InvalidSimplex("probabilities must be finite and nonnegative")
    bad = np.nonzero(np.abs(P.sum(axis=1) - 1.0) > 1e-9)[0]
    if bad.size:
        raise InvalidSimplex(f"row {int(bad[0])} sums to {P[bad[0]].sum()!r}, not 1")


def uncertainty_scores(P, measure="entropy") -> np.ndarray:
    """Row-wise uncertainty of a matrix of class-probability rows."""
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    _check_simplex(P)
    if measure == "least_confidence":
        return 1.0 - P.max(axis=1)
    if measure == "margin":
        top = -np.sort(-P, axis=1)
        second = top[:, 1] if P.shape[1] > 1 else np.zeros(P.shape[0])
        return 1.0 - (top[:, 0] - second)
    if measure == "entropy":
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(P > 0, P * np.log2(np.where(P > 0, P, 1.0)), 0.0)
        return -terms.sum(axis=1) + 0.0
    raise ValueError(f"unknown uncertainty measure {measure!r}")


def uncertainty(p, measure="entropy") -> float:
    return float(uncertainty_scores(np.asarray(p, dtype=np.float64)[None, :], measure)[0])


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------


def knn_predict_proba(labeled: FeatureDataset, queries, k=5) -> np.ndarray:
    """Vote shares among the k nearest labeled points (Euclidean).

    Equal distances are resolved toward the smaller training index.
    """
    if labeled.n == 0:
        raise EmptyTrainingSet("kNN needs at least one labeled point")
    if labeled.labels is None:
        raise MissingLabels("kNN training set has no labels")
    if not isinstance(k, (int, np.integer)) or k < 1 or k > labeled.n:
        raise BadK(f"k must be in [1, {labeled.n}], got {k}")
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    dist = cdist(Q, labeled.features)
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    votes = labeled.labels[nearest]
    C = labeled.n_classes
    counts = np.zeros((Q.shape[0], C))
    for c in range(C):
        counts[:, c] = (votes == c).sum(axis=1)
    return counts / k


@dataclass
class LogRegConfig:
    epochs: int = 200
    step_size: float | None = None  # None: 1/L from the loss smoothness bound
    l2: float = 1e-3
    seed: int = 0


def _with_bias(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def logreg_loss_grad(W, X, y, l2=0.0):
    """Mean cross-entropy plus (l2/2)||W_features||^2, and its gradient.

    ``W`` is C x (d+1) with the bias in the last column; the bias is not
    penalized.
    """
    Xb = _with_bias(np.asarray(X, dtype=np.float64))
    m = Xb.shape[0]
    Z = Xb @ W.T
    Zmax = Z.max(axis=1, keepdims=True)
    logsum = Zmax[:, 0] + np.log(np.exp(Z - Zmax).sum(axis=1))
    loss = float(np.mean(logsum - Z[np.arange(m), y]))
    P = _softmax(Z)
    P[np.arange(m), y] -= 1.0
    grad = P.T @ Xb / m
    Wf = W[:, :-1]
    loss += 0.5 * l2 * float(np.sum(Wf * Wf))
    grad[:, :-1] += l2 * Wf
    return loss, grad


def logreg_train(labeled: FeatureDataset, config: LogRegConfig | None = None) -> np.ndarray:
    """Full-batch gradient descent on softmax cross-entropy from zero weights."""
    config = config or LogRegConfig()
    if labeled.labels is None:
        raise MissingLabels("logistic regression needs labels")
    y = labeled.labels
    if np.unique(y).size < 2:
        raise SingleClassPool("need at least two classes in the labeled pool")
    X = labeled.features
    C = labeled.n_classes
    W = np.zeros((C, X.shape[1] + 1))
    if config.epochs <= 0:
        return W
    step = config.step_size
    if step is None:
        Xb = _with_bias(X)
        smooth = 0.5 * np.linalg.norm(Xb, 2) ** 2 / Xb.shape[0] + config.l2
        step = 1.0 / smooth
    for _ in range(config.epochs):
        _, grad = logreg_loss_grad(W, X, y, config.l2)
        W -= step * grad
    return W


def logreg_predict_proba(W, X) -> np.ndarray:
    return _softmax(_with_bias(np.atleast_2d(np.asarray(X, dtype=np.float64))) @ W.T)


class LogisticRegression:
    def __init__(self, config: LogRegConfig | None = None):
        self.config = config or LogRegConfig()
        self.W = None

    def fit(self, labeled: FeatureDataset):
        self.W = logreg_train(labeled, self.config)
        return self

    def predict_proba(self, X):
        return logreg_predict_proba(self.W, X)


class KNNClassifier:
    def __init__(self, k=5):
        self.k = k
        self.train = None

    def fit(self, labeled: FeatureDataset):
        self.train = labeled
        return self

    def predict_proba(self, X):
        return knn_predict_proba(self.train, X, min(self.k, self.train.n))


def accuracy(model, holdout: FeatureDataset) -> float:
    if holdout.n == 0:
        return float("nan")
    pred = np.argmax(model.predict_proba(holdout.features), axis=1)
    return float(np.mean(pred == holdout.labels))


# ---------------------------------------------------------------------------
# Filtering and the loop
# ---------------------------------------------------------------------------


def _pct_count(pct, total, rounding):
    return int(rounding(Fraction(str(pct)) * total / 100))


def rank_by_score(scores) -> np.ndarray:
    """Positions ordered by score descending, then position ascending."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(scores.size), -scores))


def filter_uncertain(scores, beta) -> np.ndarray:
    """Top ceil(beta% of |U|) positions by score, plus exact ties with the last.

    Returned in ranking order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyPool("no unlabeled items to filter")
    if not 0 < beta <= 100:
        raise ConfigInvalid(f"beta must be in (0, 100], got {beta}")
    keep = max(1, _pct_count(beta, scores.size, math.ceil))
    order = rank_by_score(scores)
    cutoff = scores[order[keep - 1]]
    while keep < order.size and scores[order[keep]] == cutoff:
        keep += 1
    return order[:keep]


ARMS = ("fass-fl", "fass-dispersion", "uncertainty", "random")


@dataclass
class FassConfig:
    budget_pct: float = 1.0
    beta_pct: float = 10.0
    rounds: int = 10
    seed_size: int = 10
    measure: str = "entropy"
    objective: str = "fl"  # fl | dispersion | none
    classifier: str = "logreg"  # logreg | knn
    kernel: str = "cosine"  # cosine | rbf
    gamma: float | None = None
    knn_k: int = 5
    epochs: int = 200
    l2: float = 1e-3
    seed: int = 0

    def validate(self, n_items=None, n_classes=None):
        problems = []
        if not 0 < self.budget_pct <= self.beta_pct <= 100:
            problems.append(
                f"need 0 < B <= beta <= 100, got B={self.budget_pct}, beta={self.beta_pct}"
            )
        if self.rounds < 1:
            problems.append(f"rounds must be >= 1, got {self.rounds}")
        if self.measure not in MEASURES:
            problems.append(f"unknown measure {self.measure!r}")
        if self.objective not in ("fl", "dispersion", "none"):
            problems.append(f"unknown objective {self.objective!r}")
        if self.classifier not in ("logreg", "knn"):
            problems.append(f"unknown classifier {self.classifier!r}")
        if self.kernel not in ("cosine", "rbf"):
            problems.append(f"unknown kernel {self.kernel!r}")
        if self.gamma is not None and not self.gamma > 0:
            problems.append(f"gamma must be positive, got {self.gamma}")
        if n_classes is not None and self.seed_size < n_classes:
            problems.append(
                f"seed_size {self.seed_size} cannot cover all {n_classes} classes"
            )
        if n_items is not None:
            if self.seed_size >= n_items:
                problems.append(f"seed_size {self.seed_size} leaves no unlabeled pool")
            if batch_size(self.budget_pct, n_items) < 1:
                problems.append(f"B={self.budget_pct}% of {n_items} items rounds to 0")
        if problems:
            raise ConfigInvalid("; ".join(problems))

    def to_dict(self):
        return asdict(self)


def batch_size(budget_pct, n) -> int:
    return _pct_count(budget_pct, n, math.floor)


@dataclass
class RoundRecord:
    round: int
    labeled_count: int
    accuracy: float
    filtered_size: int
    selected: list
    filtered: list
    wall_time: float
    warnings: list = field(default_factory=list)


@dataclass
class FassRun:
    arm: str
    config: FassConfig
    seed_indices: list
    initial_accuracy: float
    rounds: list = field(default_factory=list)

    @property
    def labeled_counts(self):
        return [r.labeled_count for r in self.rounds]

    @property
    def accuracies(self):
        return [r.accuracy for r in self.rounds]

    @property
    def final_accuracy(self):
        return self.rounds[-1].accuracy if self.rounds else self.initial_accuracy

    def labeled_indices(self):
        out = list(self.seed_indices)
        for r in self.rounds:
            out += r.selected
        return out

    def curve(self):
        xs = [len(self.seed_indices)] + self.labeled_counts
        ys = [self.initial_accuracy] + self.accuracies
        return np.array(xs, dtype=float), np.array(ys, dtype=float)

    def area_under_curve(self) -> float:
        """Trapezoid area under accuracy vs labeled count, divided by the span."""
        xs, ys = self.curve()
        if xs.size < 2 or xs[-1] == xs[0]:
            return float(ys[-1])
        area = float(np.sum((xs[1:] - xs[:-1]) * (ys[1:] + ys[:-1]) / 2))
        return area / float(xs[-1] - xs[0])


def stratified_seed(labels, n_classes, size, rng) -> list:
    """One random member per class, the remainder uniformly at random."""
    labels = np.asarray(labels)
    chosen = []
    for c in range(n_classes):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            raise SingleClassPool(f"class {c} has no members to seed from")
        chosen.append(int(rng.choice(members)))
    rest = np.setdiff1d(np.arange(labels.size), chosen)
    extra = size - len(chosen)
    if extra > 0:
        chosen += rng.choice(rest, size=extra, replace=False).tolist()
    return sorted(chosen)


def _make_model(config: FassConfig):
    if config.classifier == "knn":
        return KNNClassifier(config.knn_k)
    return LogisticRegression(LogRegConfig(config.epochs, None, config.l2, config.seed))


def _similarity(features, config: FassConfig):
    if config.kernel == "rbf":
        dist = kernels.euclidean_distance(features)
        gamma = config.gamma or kernels.median_heuristic_gamma(dist)
        return kernels.rbf_similarity(dist, gamma)
    return kernels.cosine_similarity(features)


def _select_from_filtered(features, F, b, config: FassConfig):
    """Batch of size b (or all of F) chosen from the filtered pool F."""
    if b >= F.size:
        return F.copy()
    sub = features[F]
    if config.objective == "fl":
        sel = lazy_greedy(FacilityLocation(_similarity(sub, config)), b)
    elif b >= 2:
        sel = dispersion_greedy(kernels.euclidean_distance(sub), b)
    else:
        # one pick has no pairwise distance; take the most uncertain
        return F[:1].copy()
    return F[np.asarray(sel.order, dtype=np.int64)]


def _run(dataset: FeatureDataset, holdout: FeatureDataset, config: FassConfig, arm: str):
    if dataset.labels is None or holdout.labels is None:
        raise MissingLabels("active learning needs labeled pool and holdout files")
    config.validate(dataset.n, dataset.n_classes)
    if set(dataset.ids) & set(holdout.ids):
        raise ConfigInvalid("holdout shares ids with the pool")

    n = dataset.n
    b = batch_size(config.budget_pct, n)
    seed_rng = make_rng(config.seed, STREAM_SEEDING)
    arm_rng = make_rng(config.seed, STREAM_RANDOM_ARM)
    labeled = stratified_seed(dataset.labels, dataset.n_classes, config.seed_size, seed_rng)
    unlabeled = np.setdiff1d(np.arange(n), labeled)

    model = _make_model(config).fit(dataset.subset(labeled))
    run = FassRun(arm, config, list(labeled), accuracy(model, holdout))

    for r in range(1, config.rounds + 1):
        if unlabeled.size == 0:
            log.warning("%s: unlabeled pool exhausted before round %d", arm, r)
            break
        t0 = time.perf_counter()
        warnings = []
        if arm == "random":
            take = min(b, unlabeled.size)
            batch = np.sort(arm_rng.choice(unlabeled, size=take, replace=False))
            filtered = unlabeled
        else:
            P = model.predict_proba(dataset.features[unlabeled])
            scores = uncertainty_scores(P, config.measure)
            F = unlabeled[filter_uncertain(scores, config.beta_pct)]
            if b > F.size:
                warnings.append(f"batch size {b} exceeds filtered pool {F.size}")
            if config.objective == "none":
                ranked = unlabeled[rank_by_score(scores)]
                batch = ranked[:b]
                filtered = ranked[: max(F.size, batch.size)]
            else:
                batch = _select_from_filtered(dataset.features, F, b, config)
                filtered = F
        labeled = sorted(labeled + batch.tolist())
        unlabeled = np.setdiff1d(unlabeled, batch)
        # rows sorted by index: training does not depend on acquisition order
        model = _make_model(config).fit(dataset.subset(labeled))
        for w in warnings:
            log.warning("%s round %d: %s", arm, r, w)
        run.rounds.append(
            RoundRecord(
                round=r,
                labeled_count=len(labeled),
                accuracy=accuracy(model, holdout),
                filtered_size=int(filtered.size),
                selected=[int(i) for i in batch],
                filtered=[int(i) for i in filtered],
                wall_time=time.perf_counter() - t0,
                warnings=warnings,
            )
        )
    return run


def fass_run(dataset: FeatureDataset, holdout: FeatureDataset, config: FassConfig) -> FassRun:
    arm = {"fl": "fass-fl", "dispersion": "fass-dispersion", "none": "uncertainty"}.get(
        config.objective, config.objective
    )
    return _run(dataset, holdout, config, arm)


def random_baseline_run(dataset, holdout, config: FassConfig) -> FassRun:
    return _run(dataset, holdout, config, "random")


def run_arm(arm, dataset, holdout, config: FassConfig) -> FassRun:
    if arm not in ARMS:
        raise ConfigInvalid(f"unknown arm {arm!r}; choose from {', '.join(ARMS)}")
    if arm == "random":
        return random_baseline_run(dataset, holdout, config)
    objective = {"fass-fl": "fl", "fass-dispersion": "dispersion", "uncertainty": "none"}[arm]
    cfg = FassConfig(**{**config.to_dict(), "objective": objective})
    return fass_run(dataset, holdout, cfg)
