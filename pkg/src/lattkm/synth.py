"""Synthetic data drawn from a seeded tensor-train model."""

from __future__ import annotations

import numpy as np

from .als import init_weights
from .data import Dataset
from .features import TensorProductFeatures
from .tensor_ops import tt_dot_features


def make_tt_regression(n_samples=2000, n_dims=6, n_basis=4, rank=2, noise=0.1,
                       signal_std=1.0, family="polynomial", seed=0, return_model=False):
    """Inputs uniform on ``[-1, 1]^D``, target ``f(x) + noise * N(0, 1)``.

    ``f`` is a TT model whose cores are drawn with the same rule as ALS
    initialization, then the first core is rescaled so ``f`` has sample
    standard deviation ``signal_std`` (``None`` keeps the raw draw). Features
    are fitted on the generated inputs.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n_samples, n_dims))
    fmap = TensorProductFeatures(family, n_basis).fit(X)
    weights = init_weights(rank, n_dims, n_basis, seed=rng)
    f = tt_dot_features(weights, fmap.transform(X))
    if signal_std is not None:
        scale = signal_std / f.std()
        weights.cores[0] = weights.cores[0] * scale
        f = f * scale
    y = f + noise * rng.standard_normal(n_samples)
    ds = Dataset(X, y, source=f"synthetic-tt(seed={seed})")
    if return_model:
        return ds, weights, fmap, f
    return ds
