"""Per-dimension feature maps with tensor-product structure.

Two families are supported, both with the same number of basis functions
``I`` in every dimension:

``"polynomial"``
    Monomials ``t**i`` of the input rescaled to ``t in [-1, 1]`` by the
    training min/max, each divided by its root-mean-square over the training
    inputs so every training feature column has unit RMS.
``"fourier"``
    Real Fourier basis ``[1, cos(2 pi u), sin(2 pi u), cos(4 pi u), ...]``
    with ``u = (x - a) / (b - a)``, truncated to ``I`` entries.

Inputs outside the training bounds are evaluated as-is, without clipping.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DegenerateFeatureError, ShapeError
from .tensor_ops import DEFAULT_EXPANSION_CAP, ExpansionTooLargeError, kron

FAMILIES = ("polynomial", "fourier")


def _poly_raw(t: np.ndarray, n_basis: int) -> np.ndarray:
    return np.power.outer(t, np.arange(n_basis))


def _fourier(u: np.ndarray, n_basis: int) -> np.ndarray:
    out = np.empty((u.shape[0], n_basis))
    out[:, 0] = 1.0
    for j in range(1, n_basis):
        k = (j + 1) // 2
        arg = 2.0 * np.pi * k * u
        out[:, j] = np.cos(arg) if j % 2 == 1 else np.sin(arg)
    return out


class TensorProductFeatures(TransformerMixin, BaseEstimator):
    """Fit per-dimension feature maps and evaluate the matrices ``Phi^(d)``.

    ``transform`` returns a list of ``D`` arrays of shape ``(n_samples, n_basis)``;
    the full feature vector of a sample is the Kronecker chain of its rows with
    dimension 1 fastest (see :meth:`full_feature_row`).
    """

    def __init__(self, family="polynomial", n_basis=4):
        self.family = family
        self.n_basis = n_basis

    def fit(self, X, y=None):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown feature family {self.family!r}; expected one of {FAMILIES}")
        if int(self.n_basis) < 1:
            raise ValueError(f"n_basis must be >= 1, got {self.n_basis}")
        X = check_array(X, ensure_min_samples=1)
        lower = X.min(axis=0)
        upper = X.max(axis=0)
        flat = np.flatnonzero(upper <= lower)
        if flat.size:
            raise DegenerateFeatureError(
                f"column {int(flat[0])} is constant on the training data; cannot fit bounds")
        self.lower_ = lower
        self.upper_ = upper
        self.n_features_in_ = X.shape[1]
        if self.family == "polynomial":
            norms = np.empty((X.shape[1], int(self.n_basis)))
            for d in range(X.shape[1]):
                raw = _poly_raw(self._rescale(X[:, d], d), int(self.n_basis))
                norms[d] = np.sqrt(np.mean(raw**2, axis=0))
            self.norms_ = norms
        else:
            self.norms_ = None
        return self

    def _rescale(self, x, d):
        return 2.0 * (x - self.lower_[d]) / (self.upper_[d] - self.lower_[d]) - 1.0

    def transform_dim(self, X, d: int) -> np.ndarray:
        """Feature matrix ``Phi^(d)`` for column ``d`` of ``X``."""
        check_is_fitted(self, "lower_")
        X = np.asarray(X, dtype=float)
        x = X[:, d] if X.ndim == 2 else X
        if self.family == "polynomial":
            t = self._rescale(x, d)
            return _poly_raw(t, int(self.n_basis)) / self.norms_[d]
        u = (x - self.lower_[d]) / (self.upper_[d] - self.lower_[d])
        return _fourier(u, int(self.n_basis))

    def transform(self, X):
        check_is_fitted(self, "lower_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return [self.transform_dim(X, d) for d in range(X.shape[1])]

    def full_feature_row(self, x, cap: int = DEFAULT_EXPANSION_CAP) -> np.ndarray:
        """Dense feature vector ``phi_D(x_D) kron ... kron phi_1(x_1)`` for one sample."""
        check_is_fitted(self, "lower_")
        x = np.asarray(x, dtype=float).reshape(1, -1)
        size = int(self.n_basis) ** x.shape[1]
        if size > cap:
            raise ExpansionTooLargeError(f"expansion too large: {size} entries exceeds cap {cap}")
        row = np.ones(1)
        for d in range(x.shape[1]):
            row = kron(self.transform_dim(x, d)[0], row)
        return row

    def to_dict(self) -> dict:
        check_is_fitted(self, "lower_")
        return {
            "family": self.family,
            "n_basis": int(self.n_basis),
            "lower": self.lower_.tolist(),
            "upper": self.upper_.tolist(),
            "norms": None if self.norms_ is None else self.norms_.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TensorProductFeatures":
        fm = cls(family=data["family"], n_basis=data["n_basis"])
        fm.lower_ = np.asarray(data["lower"], dtype=float)
        fm.upper_ = np.asarray(data["upper"], dtype=float)
        fm.norms_ = None if data["norms"] is None else np.asarray(data["norms"], dtype=float)
        fm.n_features_in_ = fm.lower_.shape[0]
        return fm


def fit_feature_map(X, family="polynomial", n_basis=4) -> TensorProductFeatures:
    return TensorProductFeatures(family=family, n_basis=n_basis).fit(X)


def eval_features(fmap: TensorProductFeatures, X, d: int) -> np.ndarray:
    return fmap.transform_dim(X, d)
