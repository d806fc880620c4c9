import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subsel.active import (
    FassConfig,
    LogRegConfig,
    accuracy,
    filter_uncertain,
    knn_predict_proba,
    logreg_loss_grad,
    logreg_predict_proba,
    logreg_train,
    random_baseline_run,
    fass_run,
    run_arm,
    stratified_seed,
    uncertainty,
    uncertainty_scores,
)
from subsel.data import FeatureDataset
from subsel.errors import (
    BadK,
    ConfigInvalid,
    EmptyPool,
    EmptyTrainingSet,
    InvalidSimplex,
    SingleClassPool,
)
from subsel.synth import SyntheticSpec, generate_with_holdout

# -- uncertainty -----------------------------------------------------------------


@pytest.mark.parametrize("measure", ["least_confidence", "margin", "entropy"])
def test_certain_distribution_scores_zero(measure):
    assert uncertainty([1.0, 0.0], measure) == 0.0


def test_two_way_tie():
    p = [0.5, 0.5]
    assert uncertainty(p, "least_confidence") == 0.5
    assert uncertainty(p, "margin") == 1.0
    assert uncertainty(p, "entropy") == 1.0


def test_three_class_values():
    p = [0.7, 0.2, 0.1]
    assert uncertainty(p, "least_confidence") == pytest.approx(0.3, abs=1e-15)
    assert uncertainty(p, "margin") == pytest.approx(0.5, abs=1e-15)
    # -sum p log2 p evaluated with math.log2 term by term
    assert uncertainty(p, "entropy") == pytest.approx(1.1567796494470395, abs=1e-12)


@pytest.mark.parametrize("C", range(2, 11))
def test_entropy_of_uniform_is_log2_C(C):
    assert abs(uncertainty(np.full(C, 1.0 / C), "entropy") - math.log2(C)) <= 1e-12


def test_invalid_simplex():
    with pytest.raises(InvalidSimplex):
        uncertainty([0.5, 0.6])
    with pytest.raises(InvalidSimplex):
        uncertainty([1.5, -0.5])
    with pytest.raises(ValueError):
        uncertainty([1.0, 0.0], "variance")


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_uniform_maximizes_and_vertices_vanish(C, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(C))
    p = p / p.sum()
    uniform = np.full(C, 1.0 / C)
    vertex = np.eye(C)[seed % C]
    for m in ("least_confidence", "margin", "entropy"):
        u = uncertainty(p, m)
        assert u <= uncertainty(uniform, m) + 1e-12
        assert uncertainty(vertex, m) == 0.0
        assert u >= 0


def test_scores_vectorized_match_scalar():
    P = np.random.default_rng(0).dirichlet(np.ones(4), size=50)
    P /= P.sum(axis=1, keepdims=True)
    for m in ("least_confidence", "margin", "entropy"):
        batch = uncertainty_scores(P, m)
        assert np.allclose(batch, [uncertainty(p, m) for p in P], atol=1e-15)


# -- kNN -----------------------------------------------------------------------------


def test_knn_identity_and_counts():
    train = FeatureDataset(np.array([[0.0], [1.0], [2.0], [10.0], [11.0]]), [0, 0, 0, 1, 1])
    assert knn_predict_proba(train, [[1.0]], 1).tolist() == [[1.0, 0.0]]
    assert knn_predict_proba(train, [[5.0]], 5).tolist() == [[0.6, 0.4]]


def test_knn_distance_ties_prefer_smaller_index():
    train = FeatureDataset(np.array([[-1.0], [1.0]]), [1, 0])
    assert knn_predict_proba(train, [[0.0]], 1).tolist() == [[0.0, 1.0]]


def test_knn_errors():
    train = FeatureDataset(np.zeros((2, 1)), [0, 1])
    with pytest.raises(BadK):
        knn_predict_proba(train, [[0.0]], 3)
    with pytest.raises(BadK):
        knn_predict_proba(train, [[0.0]], 0)
    with pytest.raises(EmptyTrainingSet):
        knn_predict_proba(FeatureDataset(np.zeros((0, 1)), np.zeros(0, dtype=int), n_classes=2),
                          [[0.0]], 1)


def test_knn_separated_blobs():
    rng = np.random.default_rng(0)
    centers = np.array([[0.0, 0.0], [3.0, 0.0]])

    def blobs(m):
        X = np.vstack([c + 0.1 * rng.standard_normal((m, 2)) for c in centers])
        return X, np.repeat([0, 1], m)

    X, y = blobs(50)
    Xh, yh = blobs(50)
    P = knn_predict_proba(FeatureDataset(X, y), Xh, 5)
    assert np.mean(P.argmax(1) == yh) == 1.0


# -- logistic regression --------------------------------------------------------------


def test_logreg_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 4))
    y = rng.integers(0, 3, 30)
    h = 1e-6
    for _ in range(20):
        W = rng.standard_normal((3, 5))
        _, grad = logreg_loss_grad(W, X, y, l2=0.1)
        num = np.zeros_like(W)
        for idx in np.ndindex(*W.shape):
            E = np.zeros_like(W)
            E[idx] = h
            num[idx] = (logreg_loss_grad(W + E, X, y, 0.1)[0] - logreg_loss_grad(W - E, X, y, 0.1)[0]) / (2 * h)
        rel = np.linalg.norm(grad - num) / max(np.linalg.norm(num), 1e-12)
        assert rel <= 1e-5


def test_logreg_separable():
    rng = np.random.default_rng(2)
    X = np.vstack([rng.normal(-2, 0.5, (40, 2)), rng.normal(2, 0.5, (40, 2))])
    ds = FeatureDataset(X, np.repeat([0, 1], 40))
    W = logreg_train(ds, LogRegConfig(epochs=500))
    assert np.mean(logreg_predict_proba(W, X).argmax(1) == ds.labels) == 1.0
    init_loss = logreg_loss_grad(np.zeros_like(W), X, ds.labels, 1e-3)[0]
    assert logreg_loss_grad(W, X, ds.labels, 1e-3)[0] <= init_loss


def test_logreg_zero_epochs_is_uniform():
    ds = FeatureDataset(np.random.default_rng(3).standard_normal((10, 3)), [0, 1, 2] * 3 + [0])
    W = logreg_train(ds, LogRegConfig(epochs=0))
    assert not W.any()
    assert np.allclose(logreg_predict_proba(W, ds.features), 1 / 3)


def test_logreg_single_class():
    with pytest.raises(SingleClassPool):
        logreg_train(FeatureDataset(np.zeros((3, 2)), [1, 1, 1], n_classes=2))


# -- filtering ----------------------------------------------------------------------


def test_filter_tie_expansion():
    assert filter_uncertain([0.9, 0.9, 0.5, 0.1], 25).tolist() == [0, 1]


def test_filter_full_and_total_tie():
    assert sorted(filter_uncertain([0.3, 0.1, 0.2], 100).tolist()) == [0, 1, 2]
    assert sorted(filter_uncertain([0.4] * 7, 1).tolist()) == list(range(7))


def test_filter_errors():
    with pytest.raises(EmptyPool):
        filter_uncertain([], 10)
    with pytest.raises(ConfigInvalid):
        filter_uncertain([0.1], 0)


def test_filter_fractional_percent():
    # ceil(12.5% of 8) = 1
    assert filter_uncertain(np.arange(8.0), 12.5).tolist() == [7]


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.9, 1.0]) | st.floats(0, 1), min_size=1, max_size=60),
    st.floats(0.5, 100),
)
def test_filter_properties(scores, beta):
    scores = np.asarray(scores)
    F = filter_uncertain(scores, beta)
    assert F.size >= math.ceil(beta * scores.size / 100 - 1e-9)
    assert len(set(F.tolist())) == F.size
    rest = np.setdiff1d(np.arange(scores.size), F)
    if rest.size:
        assert scores[F].min() >= scores[rest].max()
        assert scores[rest].max() < scores[F].min() or scores[F].min() not in scores[rest]


# -- the loop ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_pool():
    spec = SyntheticSpec(clusters=4, per_cluster=25, dim=3, sigma=1.0, class_rule="block",
                         layout="circle", center_scale=3.0)
    return generate_with_holdout(spec, 3, 20)


def test_stratified_seed_covers_classes():
    labels = np.array([0] * 20 + [1] * 3 + [2] * 2)
    for s in range(20):
        seed = stratified_seed(labels, 3, 5, np.random.default_rng(s))
        assert len(seed) == len(set(seed)) == 5
        assert set(labels[seed]) == {0, 1, 2}


@pytest.mark.parametrize("arm", ["fass-fl", "fass-dispersion", "uncertainty", "random"])
def test_round_invariants(small_pool, arm):
    pool, hold = small_pool
    cfg = FassConfig(budget_pct=4, beta_pct=20, rounds=5, seed_size=4, seed=1)
    run = run_arm(arm, pool, hold, cfg)
    labeled = set(run.seed_indices)
    prev = len(labeled)
    for r in run.rounds:
        sel = set(r.selected)
        assert not sel & labeled
        assert sel <= set(r.filtered)
        labeled |= sel
        assert r.labeled_count == len(labeled) == prev + len(sel)
        assert len(sel) == 4
        prev = r.labeled_count
    assert run.arm == arm


def test_uncertainty_arm_takes_most_uncertain(small_pool):
    from subsel.active import LogisticRegression

    pool, hold = small_pool
    cfg = FassConfig(budget_pct=5, beta_pct=10, rounds=1, seed_size=4, objective="none", seed=2)
    run = fass_run(pool, hold, cfg)
    model = LogisticRegression(LogRegConfig(cfg.epochs, None, cfg.l2)).fit(pool.subset(run.seed_indices))
    U = np.setdiff1d(np.arange(pool.n), run.seed_indices)
    scores = uncertainty_scores(model.predict_proba(pool.features[U]), "entropy")
    top = U[np.lexsort((U, -scores))[:5]]
    assert run.rounds[0].selected == top.tolist()


def test_exhaustive_round_equals_full_training(small_pool):
    pool, hold = small_pool
    cfg = FassConfig(budget_pct=100, beta_pct=100, rounds=1, seed_size=4)
    from subsel.active import LogisticRegression

    full = accuracy(LogisticRegression(LogRegConfig(cfg.epochs, None, cfg.l2)).fit(pool), hold)
    for arm in ("fass-fl", "uncertainty", "random"):
        run = run_arm(arm, pool, hold, cfg)
        assert sorted(run.labeled_indices()) == list(range(pool.n))
        assert run.final_accuracy == full


def test_runs_are_deterministic(small_pool):
    pool, hold = small_pool
    cfg = FassConfig(budget_pct=3, beta_pct=15, rounds=4, seed_size=4, seed=9)
    for arm in ("fass-fl", "random"):
        a, b = run_arm(arm, pool, hold, cfg), run_arm(arm, pool, hold, cfg)
        assert [r.selected for r in a.rounds] == [r.selected for r in b.rounds]
        assert a.accuracies == b.accuracies


def test_random_baseline_is_fast(small_pool):
    import time

    spec = SyntheticSpec(clusters=4, per_cluster=100, dim=10, sigma=1.5, class_rule="block",
                         layout="circle", center_scale=3.0)
    pool, hold = generate_with_holdout(spec, 42, 100)
    t0 = time.perf_counter()
    random_baseline_run(pool, hold, FassConfig(budget_pct=2, beta_pct=10, rounds=10, seed_size=4))
    assert time.perf_counter() - t0 < 10


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(budget_pct=20, beta_pct=10),
        dict(budget_pct=0),
        dict(rounds=0),
        dict(seed_size=1),
        dict(measure="variance"),
        dict(budget_pct=0.1),
    ],
)
def test_config_validation(small_pool, kwargs):
    pool, hold = small_pool
    with pytest.raises(ConfigInvalid):
        fass_run(pool, hold, FassConfig(**{"seed_size": 4, **kwargs}))


def test_knn_classifier_arm(small_pool):
    pool, hold = small_pool
    run = run_arm("fass-fl", pool, hold, FassConfig(budget_pct=4, beta_pct=20, rounds=3,
                                                     seed_size=6, classifier="knn"))
    assert len(run.rounds) == 3
