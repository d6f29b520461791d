"""Gaussian posterior over one TT-core and variational Gamma precisions.

Only the core ``d`` at which ALS terminates is random; every other core is a
point estimate. Around the ALS mode the loss is exactly quadratic in that
core, so the Laplace posterior is

    mu = (A^T A + gamma/beta I)^-1 A^T y,     C = (beta A^T A + gamma I)^-1

with ``A = A^(d)``. Noise precision ``beta`` and weight precision ``gamma``
carry Gamma posteriors updated by coordinate ascent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .als import SweepState, design_matrix, objective, solve_regularized, sweep, update_core
from .exceptions import RankDeficiencyError
from .tensor_ops import vec_core

logger = logging.getLogger(__name__)


@dataclass
class CorePosterior:
    core_index: int
    mean: np.ndarray
    cov: np.ndarray

    @property
    def size(self) -> int:
        return self.mean.shape[0]


@dataclass
class PrecisionPosterior:
    """Gamma(shape, rate) factors for noise precision beta and weight precision gamma."""

    a_beta: float = 1e-6
    b_beta: float = 1e-6
    a_gamma: float = 1e-6
    b_gamma: float = 1e-6
    prior: tuple = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("a_beta", "b_beta", "a_gamma", "b_gamma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.prior is None:
            self.prior = (self.a_beta, self.b_beta, self.a_gamma, self.b_gamma)

    @property
    def mean_beta(self) -> float:
        return self.a_beta / self.b_beta

    @property
    def mean_gamma(self) -> float:
        return self.a_gamma / self.b_gamma


@dataclass
class PredictiveDistribution:
    mean: np.ndarray
    var: np.ndarray
    cov: np.ndarray | None = None

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)


def _spd_inverse(H: np.ndarray) -> np.ndarray:
    try:
        factor = cho_factor(H, lower=True)
    except LinAlgError as exc:
        raise RankDeficiencyError(
            "Hessian is not positive definite; use gamma > 0") from exc
    C = cho_solve(factor, np.eye(H.shape[0]))
    return 0.5 * (C + C.T)


def posterior_from_design(A: np.ndarray, y, beta: float, gamma: float, core_index: int = 0) -> CorePosterior:
    if not (beta > 0 and gamma >= 0):
        raise ValueError(f"need beta > 0 and gamma >= 0, got beta={beta}, gamma={gamma}")
    y = np.asarray(y, dtype=float)
    mu = solve_regularized(A, y, gamma / beta)
    H = beta * (A.T @ A)
    H[np.diag_indices_from(H)] += gamma
    return CorePosterior(core_index, mu, _spd_inverse(H))


def laplace_posterior(state: SweepState, y, beta: float, gamma: float, core_index: int | None = None) -> CorePosterior:
    """Laplace posterior over the core at which ALS terminated."""
    d = state.current_core if core_index is None else core_index
    if d is None:
        raise ValueError("no core has been updated yet; run ALS first")
    state.prepare(d)
    return posterior_from_design(design_matrix(state, d), y, beta, gamma, core_index=d)


def predictive(A_star: np.ndarray, posterior: CorePosterior, beta: float, full_cov: bool = False) -> PredictiveDistribution:
    """``N(A* mu, 1/beta I + A* C A*^T)``; diagonal only unless ``full_cov``."""
    mean = A_star @ posterior.mean
    AC = A_star @ posterior.cov
    if full_cov:
        cov = AC @ A_star.T
        cov = 0.5 * (cov + cov.T)
        cov[np.diag_indices_from(cov)] += 1.0 / beta
        return PredictiveDistribution(mean, np.diag(cov).copy(), cov)
    var = np.einsum("ij,ij->i", AC, A_star)
    var = np.maximum(var, 0.0) + 1.0 / beta
    return PredictiveDistribution(mean, var)


def expected_residual_sq(A: np.ndarray, posterior: CorePosterior, y) -> float:
    """``E ||y - A v||^2 = ||y - A mu||^2 + tr(C A^T A)`` under ``v ~ N(mu, C)``."""
    r = np.asarray(y, dtype=float) - A @ posterior.mean
    return float(r @ r + np.sum(posterior.cov * (A.T @ A)))


def expected_weight_sq(weights, posterior: CorePosterior) -> float:
    """``E v^T v`` with the Bayesian core random and the rest fixed."""
    d = posterior.core_index
    fixed = sum(float(np.sum(c**2)) for k, c in enumerate(weights.cores) if k != d)
    return fixed + float(posterior.mean @ posterior.mean) + float(np.trace(posterior.cov))


def vi_update_precisions(pp: PrecisionPosterior, n_samples: int, n_params: int,
                         expected_resid: float, expected_wsq: float) -> PrecisionPosterior:
    """Conjugate Gamma updates; shapes are recomputed from the prior each time."""
    a_b0, b_b0, a_g0, b_g0 = pp.prior
    return replace(
        pp,
        a_beta=a_b0 + 0.5 * n_samples,
        b_beta=b_b0 + 0.5 * expected_resid,
        a_gamma=a_g0 + 0.5 * n_params,
        b_gamma=b_g0 + 0.5 * expected_wsq,
    )


def fit_vi(state: SweepState, y, precisions: PrecisionPosterior | None = None, *,
           terminal_core: int = 0, n_epochs: int = 10, max_iter: int = 10,
           refine_epochs: int = 1, tol: float = 1e-4, als_tol: float = 1e-8,
           update_precisions: bool = True):
    """Alternate ALS, Laplace posterior and Gamma updates.

    The first outer iteration runs ``n_epochs`` ALS epochs (``0`` accepts a
    state already trained to ``terminal_core``); later iterations warm-start
    and run ``refine_epochs``. Returns the final posterior, the
    precision posterior and a list of ``(J, E[beta], E[gamma])`` per iteration,
    where ``J`` is evaluated at the precisions used in that iteration. The
    returned posterior is recomputed at the final precisions.

    With ``update_precisions=False`` and ``max_iter=1`` this is plain ALS
    followed by one Laplace step at the given precisions.
    """
    y = np.asarray(y, dtype=float)
    pp = PrecisionPosterior() if precisions is None else precisions
    n_params = state.weights.n_params
    trace = []
    posterior = None
    for it in range(max_iter):
        beta, gamma = pp.mean_beta, pp.mean_gamma
        state.reg = gamma / beta
        epochs = n_epochs if it == 0 else refine_epochs
        if epochs > 0 or state.current_core != terminal_core:
            sweep(state, y, n_epochs=epochs, terminal_core=terminal_core, tol=als_tol)
        posterior = laplace_posterior(state, y, beta, gamma, core_index=terminal_core)
        trace.append((objective(state, y, beta, gamma), beta, gamma))
        if not update_precisions:
            break
        A = design_matrix(state, terminal_core)
        new = vi_update_precisions(
            pp, y.shape[0], n_params,
            expected_residual_sq(A, posterior, y),
            expected_weight_sq(state.weights, posterior))
        if not (np.isfinite(new.mean_beta) and np.isfinite(new.mean_gamma)):
            raise FloatingPointError(
                f"non-finite precision estimate: E[beta]={new.mean_beta}, E[gamma]={new.mean_gamma}")
        d_beta = abs(new.mean_beta - beta) / new.mean_beta
        d_gamma = abs(new.mean_gamma - gamma) / new.mean_gamma
        pp = new
        logger.debug("VI iteration %d: E[beta]=%.6g E[gamma]=%.6g", it + 1, pp.mean_beta, pp.mean_gamma)
        if d_beta < tol and d_gamma < tol:
            break
    if update_precisions:
        # re-solve the Bayesian core so mean, covariance and precisions agree
        state.reg = pp.mean_gamma / pp.mean_beta
        update_core(state, terminal_core, y)
        posterior = laplace_posterior(state, y, pp.mean_beta, pp.mean_gamma, core_index=terminal_core)
    return posterior, pp, trace


def core_matches_posterior(state: SweepState, posterior: CorePosterior) -> float:
    """Max abs difference between the stored core and the posterior mean."""
    return float(np.max(np.abs(vec_core(state.weights.cores[posterior.core_index]) - posterior.mean)))
