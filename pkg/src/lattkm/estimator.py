"""Scikit-learn compatible Laplace tensor-train kernel machine regressor."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .als import SweepState, build_design, init_weights, resolve_ranks, sweep
from .data import Standardizer
from .features import TensorProductFeatures
from .laplace import CorePosterior, PrecisionPosterior, PredictiveDistribution, fit_vi, predictive
from .metrics import gaussian_nll
from .tensor_ops import TensorTrain, contract_core, contract_core_right

FORMAT_VERSION = 1


class LaplaceTTKMRegressor(RegressorMixin, BaseEstimator):
    """Bayesian tensor-train kernel machine.

    Weights over tensor-product features are a tensor train trained by ALS.
    The core ``bayesian_core`` (1-based) is the last one ALS updates and gets
    a Laplace (Gaussian) posterior; the remaining cores are point estimates.
    Inputs are z-scored and the target scaled with training statistics
    before fitting.

    Parameters
    ----------
    n_basis : int
        Basis functions per input dimension.
    feature_map : {"polynomial", "fourier"}
    ranks : int or list of int
        Interior TT-ranks ``R_1..R_{D-1}``; an int means uniform ranks.
    bayesian_core : int
        1-based index of the core treated as a random variable.
    n_epochs : int
        Maximum ALS epochs for the initial fit.
    inference : {"vi", "fixed"}
        ``"vi"`` learns Gamma posteriors over the precisions; ``"fixed"`` uses
        ``beta`` and ``gamma`` as given.
    beta, gamma : float
        Noise and weight precisions for ``inference="fixed"`` (standardized scale).
    beta_prior, gamma_prior : (shape, rate)
        Gamma priors used by ``inference="vi"``.
    max_iter : int
        Outer VI iterations.
    n_restarts : int
        Random initializations tried; the one with the lowest objective after
        the first ``n_epochs`` ALS epochs is kept.
    center_target : bool
        Subtract the training mean of ``y`` before fitting. Off by default:
        adding a constant to a TT function can raise its rank by one.
    """

    def __init__(self, n_basis=4, feature_map="polynomial", ranks=2, bayesian_core=1,
                 n_epochs=10, inference="vi", beta=1.0, gamma=1.0,
                 beta_prior=(1e-6, 1e-6), gamma_prior=(1e-6, 1e-6), max_iter=10,
                 tol=1e-4, als_tol=1e-8, n_restarts=3, center_target=False, random_state=0):
        self.n_basis = n_basis
        self.feature_map = feature_map
        self.ranks = ranks
        self.bayesian_core = bayesian_core
        self.n_epochs = n_epochs
        self.inference = inference
        self.beta = beta
        self.gamma = gamma
        self.beta_prior = beta_prior
        self.gamma_prior = gamma_prior
        self.max_iter = max_iter
        self.tol = tol
        self.als_tol = als_tol
        self.n_restarts = n_restarts
        self.center_target = center_target
        self.random_state = random_state

    def _validate(self, n_features):
        if self.inference not in ("vi", "fixed"):
            raise ValueError(f"inference must be 'vi' or 'fixed', got {self.inference!r}")
        if not 1 <= int(self.bayesian_core) <= n_features:
            raise ValueError(f"bayesian_core must be in 1..{n_features}, got {self.bayesian_core}")
        if int(self.n_epochs) < 1 or int(self.max_iter) < 1 or int(self.n_restarts) < 1:
            raise ValueError("n_epochs, max_iter and n_restarts must be >= 1")
        if self.inference == "fixed" and not (self.beta > 0 and self.gamma > 0):
            raise ValueError(f"beta and gamma must be positive, got {self.beta}, {self.gamma}")
        return resolve_ranks(self.ranks, n_features)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, ensure_min_samples=2)
        ranks = self._validate(X.shape[1])
        self.n_features_in_ = X.shape[1]
        self.standardizer_ = Standardizer(self.center_target).fit(X, y)
        Xs = self.standardizer_.transform(X)
        ys = self.standardizer_.transform_y(y)
        self.features_ = TensorProductFeatures(self.feature_map, int(self.n_basis)).fit(Xs)
        phis = self.features_.transform(Xs)
        d = int(self.bayesian_core) - 1
        if self.inference == "vi":
            pp = PrecisionPosterior(*self.beta_prior, *self.gamma_prior)
        else:
            pp = PrecisionPosterior(float(self.beta), 1.0, float(self.gamma), 1.0)
        state = self._initial_state(phis, ys, ranks, d, pp.mean_gamma / pp.mean_beta)
        self.posterior_, self.precisions_, self.trace_ = fit_vi(
            state, ys, pp, terminal_core=d, n_epochs=0,
            max_iter=int(self.max_iter) if self.inference == "vi" else 1,
            tol=self.tol, als_tol=self.als_tol,
            update_precisions=self.inference == "vi")
        self.weights_ = state.weights
        self.n_iter_ = len(self.trace_)
        return self

    def _initial_state(self, phis, ys, ranks, d, reg) -> SweepState:
        """Best of ``n_restarts`` seeded initializations after ``n_epochs`` ALS epochs."""
        base = self.random_state
        if base is None:
            base = np.random.SeedSequence().entropy
        best, best_j = None, np.inf
        for r in range(int(self.n_restarts)):
            seed = base if int(self.n_restarts) == 1 else [int(base), r]
            weights = init_weights(ranks, len(phis), int(self.n_basis), seed=seed)
            state = SweepState(weights, phis, reg=reg)
            j = sweep(state, ys, n_epochs=int(self.n_epochs), terminal_core=d, tol=self.als_tol)[-1]
            if j < best_j:
                best, best_j = state, j
        return best

    @property
    def beta_(self) -> float:
        """Expected noise precision on the standardized target scale."""
        return self.precisions_.mean_beta

    @property
    def gamma_(self) -> float:
        return self.precisions_.mean_gamma

    @property
    def noise_precision_(self) -> float:
        """Expected noise precision in original target units."""
        return self.precisions_.mean_beta / self.standardizer_.y_std_**2

    def design_matrix(self, X) -> np.ndarray:
        """``A*^(d)`` for new inputs, built from the trained cores."""
        check_is_fitted(self, "posterior_")
        X = check_array(X)
        phis = self.features_.transform(self.standardizer_.transform(X))
        d = self.posterior_.core_index
        cores = self.weights_.cores
        left = np.ones((X.shape[0], 1))
        for j in range(d):
            left = contract_core(left, phis[j], cores[j])
        right = np.ones((X.shape[0], 1))
        for j in range(len(cores) - 1, d, -1):
            right = contract_core_right(right, phis[j], cores[j])
        return build_design(left, phis[d], right)

    def predict_distribution(self, X, full_cov=False, standardized=False) -> PredictiveDistribution:
        A = self.design_matrix(X)
        pred = predictive(A, self.posterior_, self.beta_, full_cov=full_cov)
        if standardized:
            return pred
        s = self.standardizer_
        cov = None if pred.cov is None else pred.cov * s.y_std_**2
        return PredictiveDistribution(s.inverse_mean(pred.mean), s.inverse_var(pred.var), cov)

    def predict(self, X, return_std=False):
        pred = self.predict_distribution(X)
        if return_std:
            return pred.mean, pred.std
        return pred.mean

    def nll(self, X, y) -> float:
        pred = self.predict_distribution(X)
        return gaussian_nll(np.asarray(y, dtype=float), pred.mean, pred.var)

    def to_dict(self) -> dict:
        check_is_fitted(self, "posterior_")
        pp = self.precisions_
        return {
            "format": "lattkm-model",
            "version": FORMAT_VERSION,
            "params": _jsonable(self.get_params()),
            "standardizer": self.standardizer_.to_dict(),
            "feature_map": self.features_.to_dict(),
            "cores": [{"shape": list(c.shape), "data": c.ravel().tolist()} for c in self.weights_.cores],
            "posterior": {
                "core_index": self.posterior_.core_index,
                "mean": self.posterior_.mean.tolist(),
                "cov": {"shape": list(self.posterior_.cov.shape),
                        "data": self.posterior_.cov.ravel().tolist()},
            },
            "precisions": {"a_beta": pp.a_beta, "b_beta": pp.b_beta,
                           "a_gamma": pp.a_gamma, "b_gamma": pp.b_gamma,
                           "prior": list(pp.prior)},
            "trace": [list(map(float, t)) for t in self.trace_],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LaplaceTTKMRegressor":
        if data.get("format") != "lattkm-model":
            raise ValueError("not a lattkm model document")
        params = dict(data["params"])
        for key in ("beta_prior", "gamma_prior"):
            params[key] = tuple(params[key])
        model = cls(**params)
        model.standardizer_ = Standardizer.from_dict(data["standardizer"])
        model.features_ = TensorProductFeatures.from_dict(data["feature_map"])
        model.weights_ = TensorTrain(
            [np.asarray(c["data"], dtype=float).reshape(c["shape"]) for c in data["cores"]])
        post = data["posterior"]
        model.posterior_ = CorePosterior(
            int(post["core_index"]), np.asarray(post["mean"], dtype=float),
            np.asarray(post["cov"]["data"], dtype=float).reshape(post["cov"]["shape"]))
        p = data["precisions"]
        model.precisions_ = PrecisionPosterior(p["a_beta"], p["b_beta"], p["a_gamma"], p["b_gamma"],
                                               prior=tuple(p["prior"]))
        model.trace_ = [tuple(t) for t in data["trace"]]
        model.n_features_in_ = len(model.weights_)
        model.n_iter_ = len(model.trace_)
        return model

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "LaplaceTTKMRegressor":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _jsonable(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, tuple):
            v = list(v)
        elif isinstance(v, np.generic):
            v = v.item()
        out[k] = v
    return out
