"""Predictive metrics shared by every model."""

import numpy as np


def gaussian_nll(y, mean, var) -> float:
    """Average Gaussian negative log-likelihood of ``y`` under ``N(mean, var)``."""
    y = np.asarray(y, dtype=float)
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if not (y.shape == mean.shape == var.shape):
        raise ValueError(f"shape mismatch: y{y.shape}, mean{mean.shape}, var{var.shape}")
    if np.any(~(var > 0)):
        raise ValueError("predictive variances must be strictly positive")
    return float(np.mean(0.5 * np.log(2 * np.pi * var) + (y - mean) ** 2 / (2 * var)))


def rmse(y, mean) -> float:
    y = np.asarray(y, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if y.shape != mean.shape:
        raise ValueError(f"shape mismatch: y{y.shape}, mean{mean.shape}")
    return float(np.sqrt(np.mean((y - mean) ** 2)))
