import numpy as np
import pytest

from lattkm.als import init_weights


def random_instance(rng, D, I, R, N):
    """Random TT weights plus random feature matrices."""
    ranks = [int(r) for r in rng.integers(1, R + 1, size=D - 1)]
    w = init_weights(ranks, D, I, seed=rng)
    phis = [rng.standard_normal((N, I)) for _ in range(D)]
    return w, phis


def dense_features(phis):
    """Brute-force feature matrix: row n is phi_D kron ... kron phi_1 (first mode fastest)."""
    N = phis[0].shape[0]
    rows = []
    for n in range(N):
        r = np.ones(1)
        for phi in phis:
            r = np.kron(phi[n], r)
        rows.append(r)
    return np.array(rows)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
