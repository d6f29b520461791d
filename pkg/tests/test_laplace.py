import numpy as np
import pytest

from lattkm.als import SweepState, design_matrix, sweep
from lattkm.exceptions import RankDeficiencyError
from lattkm.laplace import (
    CorePosterior, PrecisionPosterior, core_matches_posterior, expected_residual_sq,
    expected_weight_sq, fit_vi, posterior_from_design, predictive, vi_update_precisions,
)
from conftest import random_instance


def test_posterior_matches_closed_form(rng):
    A, y = rng.standard_normal((15, 4)), rng.standard_normal(15)
    beta, gamma = 3.0, 0.5
    post = posterior_from_design(A, y, beta, gamma)
    H = beta * A.T @ A + gamma * np.eye(4)
    C = np.linalg.inv(H)
    np.testing.assert_allclose(post.cov, C, atol=1e-12)
    np.testing.assert_allclose(post.mean, beta * C @ A.T @ y, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(post.cov) > 0)


def test_gamma_zero_rank_deficient(rng):
    A = np.zeros((5, 3))
    with pytest.raises(RankDeficiencyError):
        posterior_from_design(A, np.ones(5), 1.0, 0.0)
    with pytest.raises(ValueError):
        posterior_from_design(A, np.ones(5), 0.0, 1.0)


def test_predictive_formulas(rng):
    A, y = rng.standard_normal((20, 3)), rng.standard_normal(20)
    post = posterior_from_design(A, y, 4.0, 1.0)
    As = rng.standard_normal((6, 3))
    pred = predictive(As, post, 4.0, full_cov=True)
    np.testing.assert_allclose(pred.mean, As @ post.mean, atol=1e-12)
    np.testing.assert_allclose(pred.cov, 0.25 * np.eye(6) + As @ post.cov @ As.T, atol=1e-12)
    assert np.all(pred.var >= 0.25)
    diag = predictive(As, post, 4.0)
    np.testing.assert_allclose(diag.var, pred.var, atol=1e-12)
    assert diag.cov is None


def test_expectations_against_monte_carlo(rng):
    A, y = rng.standard_normal((10, 3)), rng.standard_normal(10)
    post = posterior_from_design(A, y, 2.0, 1.0)
    v = rng.multivariate_normal(post.mean, post.cov, size=100_000)
    mc = np.mean(np.sum((y[None, :] - v @ A.T) ** 2, axis=1))
    assert abs(expected_residual_sq(A, post, y) - mc) / mc < 0.01


def test_expected_weight_sq_includes_fixed_cores(rng):
    w, _ = random_instance(rng, 3, 2, 2, 1)
    n = w.cores[1].size
    post = CorePosterior(1, rng.standard_normal(n), np.diag(rng.uniform(0.1, 1, n)))
    fixed = np.sum(w.cores[0] ** 2) + np.sum(w.cores[2] ** 2)
    expected = fixed + post.mean @ post.mean + np.trace(post.cov)
    assert expected_weight_sq(w, post) == pytest.approx(expected, rel=1e-12)


def test_gamma_updates_do_not_accumulate():
    pp = PrecisionPosterior(1e-6, 1e-6, 1e-6, 1e-6)
    once = vi_update_precisions(pp, 10, 7, 4.0, 3.0)
    twice = vi_update_precisions(once, 10, 7, 4.0, 3.0)
    assert once == twice
    assert once.a_beta == pytest.approx(1e-6 + 5)
    assert once.b_beta == pytest.approx(1e-6 + 2)
    assert once.a_gamma == pytest.approx(1e-6 + 3.5)
    assert once.b_gamma == pytest.approx(1e-6 + 1.5)
    assert once.mean_beta == pytest.approx(once.a_beta / once.b_beta)


def _trained_state(rng, D=4, N=60):
    w, phis = random_instance(rng, D, 3, 2, N)
    y = rng.standard_normal(N)
    return SweepState(w, phis), y


def test_fit_vi_fixed_mode_mean_equals_core(rng):
    state, y = _trained_state(rng)
    pp = PrecisionPosterior(5.0, 1.0, 0.5, 1.0)
    post, out, trace = fit_vi(state, y, pp, terminal_core=2, n_epochs=3, max_iter=1,
                              update_precisions=False)
    assert out == pp and len(trace) == 1
    assert core_matches_posterior(state, post) < 1e-10


def test_fit_vi_consistent_at_final_precisions(rng):
    state, y = _trained_state(rng)
    post, pp, trace = fit_vi(state, y, terminal_core=1, n_epochs=3, max_iter=5)
    assert core_matches_posterior(state, post) < 1e-10
    state.prepare(1)
    ref = posterior_from_design(design_matrix(state, 1), y, pp.mean_beta, pp.mean_gamma)
    np.testing.assert_allclose(post.cov, ref.cov, atol=1e-12)
    assert 1 <= len(trace) <= 5


def test_n_epochs_zero_requires_no_resweep(rng):
    state, y = _trained_state(rng)
    state.reg = 1.0
    sweep(state, y, n_epochs=2, terminal_core=0)
    before = [c.copy() for c in state.weights.cores]
    fit_vi(state, y, PrecisionPosterior(1.0, 1.0, 1.0, 1.0), terminal_core=0, n_epochs=0,
           max_iter=1, update_precisions=False)
    for a, b in zip(before, state.weights.cores):
        np.testing.assert_array_equal(a, b)


def test_identity_design_example():
    y = np.array([1.0, -2.0, 4.0])
    post = posterior_from_design(np.eye(3), y, 1.0, 1.0)
    np.testing.assert_allclose(post.mean, y / 2, atol=1e-14)
    np.testing.assert_allclose(post.cov, 0.5 * np.eye(3), atol=1e-14)


def test_strong_prior_limit(rng):
    A, y = rng.standard_normal((12, 3)), rng.standard_normal(12)
    post = posterior_from_design(A, y, 1.0, 1e10)
    assert np.max(np.abs(post.mean)) < 1e-8
    np.testing.assert_allclose(post.cov, 1e-10 * np.eye(3), rtol=1e-6, atol=1e-18)
    assert np.max(np.abs(predictive(A, post, 1.0).mean)) < 1e-8


def test_single_point_predictive_scalar_formula(rng):
    A, y = rng.standard_normal((8, 2)), rng.standard_normal(8)
    beta, gamma = 2.5, 0.7
    post = posterior_from_design(A, y, beta, gamma)
    a = rng.standard_normal(2)
    # 2x2 inverse by hand
    H = beta * A.T @ A + gamma * np.eye(2)
    det = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
    C = np.array([[H[1, 1], -H[0, 1]], [-H[1, 0], H[0, 0]]]) / det
    var = 1 / beta + a @ C @ a
    pred = predictive(a[None, :], post, beta)
    assert pred.var[0] == pytest.approx(var, abs=1e-10)


def test_expectation_examples(rng):
    A, y = rng.standard_normal((6, 3)), rng.standard_normal(6)
    mu = rng.standard_normal(3)
    delta = CorePosterior(0, mu, np.zeros((3, 3)))
    assert expected_residual_sq(A, delta, y) == pytest.approx(np.sum((y - A @ mu) ** 2))
    iso = CorePosterior(0, np.zeros(4), 0.3 * np.eye(4))
    assert expected_residual_sq(np.eye(4), iso, np.zeros(4)) == pytest.approx(4 * 0.3)
    from lattkm.tensor_ops import TensorTrain
    w = TensorTrain([np.zeros((1, 2, 2)), np.zeros((2, 2, 1))])
    assert expected_weight_sq(w, CorePosterior(1, np.zeros(4), np.eye(4))) == pytest.approx(4.0)
    w = TensorTrain([rng.standard_normal((1, 2, 2)), rng.standard_normal((2, 2, 1))])
    v = w.cores[1].ravel(order="F")
    assert expected_weight_sq(w, CorePosterior(1, v, np.zeros((4, 4)))) == pytest.approx(w.squared_norm())


def test_vi_update_example():
    pp = PrecisionPosterior(1.0, 1.0, 1.0, 1.0)
    out = vi_update_precisions(pp, 10, 3, 4.0, 0.0)
    assert (out.a_beta, out.b_beta, out.mean_beta) == (6.0, 3.0, 2.0)
    zero = vi_update_precisions(PrecisionPosterior(2.0, 0.5, 1.0, 1.0), 10, 3, 0.0, 1.0)
    assert zero.mean_beta == pytest.approx((2.0 + 5) / 0.5)


def test_noiseless_beta_grows(rng):
    from lattkm.als import init_weights
    from lattkm.tensor_ops import tt_dot_features
    truth = init_weights([2, 2], 3, 3, seed=1)
    phis = [rng.uniform(-1, 1, (200, 3)) for _ in range(3)]
    y = tt_dot_features(truth, phis)
    y = y / y.std()
    state = SweepState(init_weights([2, 2], 3, 3, seed=2), phis)
    _, _, trace = fit_vi(state, y, terminal_core=0, n_epochs=10, max_iter=6, tol=0)
    betas = [t[1] for t in trace]
    assert len(betas) == 6
    assert all(b2 >= b1 for b1, b2 in zip(betas[1:], betas[2:]))
    assert betas[-1] > 1e3


def test_fit_vi_deterministic(rng):
    from lattkm.als import init_weights
    phis = [rng.standard_normal((40, 3)) for _ in range(3)]
    y = rng.standard_normal(40)
    runs = [fit_vi(SweepState(init_weights(2, 3, 3, seed=0), phis), y, terminal_core=2,
                   n_epochs=2, max_iter=3)[2] for _ in range(2)]
    assert runs[0] == runs[1]


def test_param_count_for_gamma_shape(rng):
    from lattkm.als import init_weights
    w = init_weights([2, 3], 3, 4, seed=0)
    assert w.n_params == 4 * (1 * 2 + 2 * 3 + 3 * 1)
