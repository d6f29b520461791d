import math

import numpy as np
import pytest
from sklearn.base import clone

from lattkm.gp import ExactGPRegressor, expand_grid, se_kernel, select_hyperparameters


def hand_kernel(a, b, s2, ell):
    return s2 * math.exp(-sum((x - z) ** 2 for x, z in zip(a, b)) / (2 * ell**2))


def test_three_point_hand_algebra():
    X = [[0.0], [0.7], [1.5]]
    y = np.array([0.2, -0.4, 1.1])
    s2, ell, beta = 1.3, 0.8, 20.0
    xs = [[0.3], [2.0]]
    K = np.array([[hand_kernel(a, b, s2, ell) for b in X] for a in X]) + np.eye(3) / beta
    Kinv = np.linalg.inv(K)
    gp = ExactGPRegressor(s2, ell, beta, standardize=False).fit(np.array(X), y)
    pred = gp.predict_distribution(np.array(xs))
    for j, x in enumerate(xs):
        k = np.array([hand_kernel(x, a, s2, ell) for a in X])
        assert pred.mean[j] == pytest.approx(k @ Kinv @ y, abs=1e-10)
        assert pred.var[j] == pytest.approx(s2 - k @ Kinv @ k + 1 / beta, abs=1e-10)


def test_single_point_scalar_formula():
    gp = ExactGPRegressor(2.0, 1.0, 4.0, standardize=False).fit(np.array([[0.5]]), np.array([3.0]))
    assert gp.predict(np.array([[0.5]]))[0] == pytest.approx(2.0 * 3.0 / (2.0 + 0.25), abs=1e-12)


def test_interpolation_limit(rng):
    X, y = rng.uniform(-1, 1, (6, 2)), rng.standard_normal(6)
    gp = ExactGPRegressor(1.0, 0.5, 1e12, standardize=False).fit(X, y)
    pred = gp.predict_distribution(X, latent=True)
    np.testing.assert_allclose(pred.mean, y, atol=1e-4)
    assert np.all(pred.var < 1e-6)


def test_prior_reversion(rng):
    X, y = rng.uniform(-1, 1, (6, 2)), rng.standard_normal(6)
    gp = ExactGPRegressor(1.7, 0.05, 10.0, standardize=False).fit(X, y)
    pred = gp.predict_distribution(np.array([[50.0, 50.0]]), latent=True)
    assert abs(pred.mean[0]) < 1e-12
    assert pred.var[0] == pytest.approx(1.7, abs=1e-12)


def test_decoupled_points():
    X = np.array([[0.0], [10.0], [20.0]])
    y = np.array([1.0, -2.0, 0.5])
    gp = ExactGPRegressor(1.0, 0.01, 5.0, standardize=False).fit(X, y)
    np.testing.assert_allclose(gp.predict(X), y * 1.0 / (1.0 + 0.2), atol=1e-12)


def test_kernel_shape_and_values(rng):
    A, B = rng.standard_normal((3, 2)), rng.standard_normal((4, 2))
    K = se_kernel(A, B, 2.0, 0.7)
    assert K.shape == (3, 4)
    assert K[1, 2] == pytest.approx(hand_kernel(A[1], B[2], 2.0, 0.7))


def test_jitter_escalation():
    X = np.zeros((4, 1))  # identical inputs: K is rank one
    gp = ExactGPRegressor(1.0, 1.0, 1e17, standardize=False).fit(X, np.ones(4))
    assert gp.jitter_ > 0


def test_clamps_tiny_negative_variance(monkeypatch, rng):
    import lattkm.gp as gpmod
    X = rng.uniform(-1, 1, (5, 1))
    gp = ExactGPRegressor(1.0, 1.0, 1e12, standardize=False).fit(X, np.ones(5))
    real = gpmod.cho_solve
    # round-off of order 1e-11 at a training point, where the latent variance is ~0
    monkeypatch.setattr(gpmod, "cho_solve", lambda c, b: real(c, b) * (1 + 1e-11))
    with pytest.warns(RuntimeWarning, match="clamping"):
        pred = gp.predict_distribution(X[:1], latent=True)
    assert pred.var[0] == 0.0
    monkeypatch.setattr(gpmod, "cho_solve", lambda c, b: real(c, b) * (1 + 1e-6))
    with pytest.raises(FloatingPointError):
        gp.predict_distribution(X[:1], latent=True)


def test_standardized_fit_predicts_original_units(rng):
    X = rng.uniform(0, 10, (40, 1))
    y = 100 + 5 * np.sin(X[:, 0])
    gp = ExactGPRegressor(1.0, 0.5, 1000.0).fit(X, y)
    np.testing.assert_allclose(gp.predict(X), y, atol=0.1)
    assert clone(gp).get_params()["lengthscale"] == 0.5


def test_select_single_and_duplicates(rng):
    X, y = rng.standard_normal((20, 1)), rng.standard_normal(20)
    one = [{"signal_variance": 1.0, "lengthscale": 3.0, "beta": 2.0}]
    assert select_hyperparameters(X, y, one) == one[0]


def test_select_ties_keep_first(monkeypatch, rng):
    X, y = rng.standard_normal((20, 1)), rng.standard_normal(20)
    monkeypatch.setattr(ExactGPRegressor, "nll", lambda self, X, y: 1.0)
    grid = [{"signal_variance": 1.0, "lengthscale": ell, "beta": 10.0} for ell in (2.0, 1.0, 0.5)]
    assert select_hyperparameters(X, y, grid)["lengthscale"] == 2.0


def test_expand_grid_product_order():
    grid = expand_grid({"signal_variance": [1], "lengthscale": [1, 2], "beta": [1, 2, 3]})
    assert len(grid) == 6
    assert [g["beta"] for g in grid[:3]] == [1, 2, 3]
    assert expand_grid([{"beta": 1}]) == [{"beta": 1}]


def test_select_recovers_lengthscale():
    rng = np.random.default_rng(7)
    X = rng.uniform(-3, 3, (200, 1))
    K = se_kernel(X, X, 1.0, 1.0) + 1e-8 * np.eye(200)
    y = np.linalg.cholesky(K) @ rng.standard_normal(200) + 0.1 * rng.standard_normal(200)
    grid = {"signal_variance": [1.0], "lengthscale": [0.125, 0.25, 0.5, 1.0, 2.0, 4.0], "beta": [100.0]}
    best = select_hyperparameters(X, y, grid, standardize=False)
    assert best["lengthscale"] in (0.5, 1.0, 2.0)
