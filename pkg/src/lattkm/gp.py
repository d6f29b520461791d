"""Exact Gaussian-process regression baseline with a squared-exponential kernel."""

from __future__ import annotations

import itertools
import logging
import warnings

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Standardizer
from .laplace import PredictiveDistribution
from .metrics import gaussian_nll

logger = logging.getLogger(__name__)

JITTERS = (0.0, 1e-10, 1e-8, 1e-6)

DEFAULT_GRID = {
    "signal_variance": (1.0,),
    "lengthscale": (0.25, 0.5, 1.0, 2.0, 4.0),
    "beta": (1.0, 10.0, 100.0, 1000.0),
}


def se_kernel(X1, X2, signal_variance=1.0, lengthscale=1.0) -> np.ndarray:
    """``s2 * exp(-|x - x'|^2 / (2 l^2))`` with one lengthscale for all dimensions."""
    d2 = cdist(np.atleast_2d(X1), np.atleast_2d(X2), "sqeuclidean")
    return signal_variance * np.exp(-0.5 * d2 / lengthscale**2)


class ExactGPRegressor(RegressorMixin, BaseEstimator):
    """Full GP regression with zero prior mean and Gaussian noise of precision ``beta``.

    ``predict_distribution`` returns the predictive distribution of noisy
    targets (latent variance plus ``1/beta``) so it is comparable with the
    tensor-train model; pass ``latent=True`` for the latent function.
    With ``standardize=True`` inputs and target are z-scored on the training
    data and hyperparameters refer to the standardized scale.
    """

    def __init__(self, signal_variance=1.0, lengthscale=1.0, beta=100.0, standardize=True):
        self.signal_variance = signal_variance
        self.lengthscale = lengthscale
        self.beta = beta
        self.standardize = standardize

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if not (self.signal_variance > 0 and self.lengthscale > 0 and self.beta > 0):
            raise ValueError("signal_variance, lengthscale and beta must be positive")
        self.n_features_in_ = X.shape[1]
        if self.standardize:
            self.standardizer_ = Standardizer().fit(X, y)
            X = self.standardizer_.transform(X)
            y = self.standardizer_.transform_y(y)
        else:
            self.standardizer_ = None
        K = se_kernel(X, X, self.signal_variance, self.lengthscale)
        K[np.diag_indices_from(K)] += 1.0 / self.beta
        for jitter in JITTERS:
            try:
                Kj = K if jitter == 0 else K + jitter * np.eye(K.shape[0])
                # inputs already passed check_X_y, so skip the finiteness scan
                self.chol_ = cho_factor(Kj, lower=True, check_finite=False)
                break
            except LinAlgError:
                logger.debug("Cholesky failed with jitter %g", jitter)
        else:
            raise LinAlgError("kernel matrix is not positive definite even with jitter 1e-6")
        self.jitter_ = jitter
        self.X_train_ = X
        self.alpha_ = cho_solve(self.chol_, y, check_finite=False)
        return self

    def predict_distribution(self, X, latent=False, full_cov=False) -> PredictiveDistribution:
        check_is_fitted(self, "alpha_")
        X = check_array(X)
        if self.standardizer_ is not None:
            X = self.standardizer_.transform(X)
        Ks = se_kernel(self.X_train_, X, self.signal_variance, self.lengthscale)
        mean = Ks.T @ self.alpha_
        V = cho_solve(self.chol_, Ks)
        if full_cov:
            cov = se_kernel(X, X, self.signal_variance, self.lengthscale) - Ks.T @ V
            cov = 0.5 * (cov + cov.T)
            var = np.diag(cov).copy()
        else:
            cov = None
            var = self.signal_variance - np.einsum("ij,ij->j", Ks, V)
        neg = var < 0
        if np.any(var < -1e-10):
            raise FloatingPointError(f"latent variance {var.min():.3g} is significantly negative")
        if np.any(neg):
            warnings.warn("clamping slightly negative latent variances to 0", RuntimeWarning)
            var = np.where(neg, 0.0, var)
        if not latent:
            var = var + 1.0 / self.beta
            if cov is not None:
                cov[np.diag_indices_from(cov)] += 1.0 / self.beta
        if cov is not None:
            cov[np.diag_indices_from(cov)] = var
        s = self.standardizer_
        if s is not None:
            mean = s.inverse_mean(mean)
            var = s.inverse_var(var)
            cov = None if cov is None else cov * s.y_std_**2
        return PredictiveDistribution(mean, var, cov)

    def predict(self, X, return_std=False):
        pred = self.predict_distribution(X)
        if return_std:
            return pred.mean, pred.std
        return pred.mean

    def nll(self, X, y) -> float:
        pred = self.predict_distribution(X)
        return gaussian_nll(np.asarray(y, dtype=float), pred.mean, pred.var)


def expand_grid(grid) -> list[dict]:
    """Accept a dict of value lists (product, last key fastest) or a list of dicts."""
    if isinstance(grid, dict):
        keys = ("signal_variance", "lengthscale", "beta")
        return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    return [dict(g) for g in grid]


def select_hyperparameters(X, y, grid=None, seed=0, holdout=0.2, standardize=True) -> dict:
    """Grid point with the highest held-out log likelihood on an internal split.

    Ties go to the earliest grid point.
    """
    X, y = check_X_y(X, y, y_numeric=True)
    candidates = expand_grid(DEFAULT_GRID if grid is None else grid)
    if not candidates:
        raise ValueError("hyperparameter grid is empty")
    if len(candidates) == 1:
        return candidates[0]
    n = X.shape[0]
    perm = np.random.default_rng(seed).permutation(n)
    n_fit = int(np.ceil(round(n * (1 - holdout), 9)))
    fit_idx, val_idx = np.sort(perm[:n_fit]), np.sort(perm[n_fit:])
    best, best_ll = None, -np.inf
    for params in candidates:
        gp = ExactGPRegressor(standardize=standardize, **params).fit(X[fit_idx], y[fit_idx])
        ll = -gp.nll(X[val_idx], y[val_idx])
        if ll > best_ll:
            best, best_ll = params, ll
    return best
