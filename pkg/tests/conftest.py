import itertools

import numpy as np
import pytest

S3 = np.array([[1.0, 0.8, 0.1], [0.8, 1.0, 0.2], [0.1, 0.2, 1.0]])
D3 = np.array([[0.0, 2.0, 5.0], [2.0, 0.0, 3.0], [5.0, 3.0, 0.0]])


@pytest.fixture
def S():
    return S3.copy()


@pytest.fixture
def D():
    return D3.copy()


def random_similarity(rng, n, d=3):
    """Symmetric similarity in [0, 1] with unit diagonal (rescaled cosine)."""
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    S = (1 + X @ X.T) / 2
    S = np.clip((S + S.T) / 2, 0, 1)
    np.fill_diagonal(S, 1.0)
    return S


def random_metric(rng, n, d=2):
    X = rng.uniform(0, 10, size=(n, d))
    return np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))


def fl_oracle(S, X):
    """Plain-loop facility location: sum_i max_{j in X} s_ij."""
    X = list(X)
    if not X:
        return 0.0
    return sum(max(S[i][j] for j in X) for i in range(len(S)))


def disp_oracle(D, X):
    X = list(X)
    if len(X) < 2:
        return float("inf")
    return min(D[a][b] for a, b in itertools.combinations(X, 2))


def subsets(n):
    for r in range(n + 1):
        yield from itertools.combinations(range(n), r)
