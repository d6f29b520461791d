"""Bayesian tensor-train kernel machines with a Laplace posterior over one core."""

from .data import Dataset, Standardizer, cyclic_shift, load_csv, split
from .estimator import LaplaceTTKMRegressor
from .features import TensorProductFeatures
from .gp import ExactGPRegressor
from .laplace import CorePosterior, PrecisionPosterior, PredictiveDistribution
from .metrics import gaussian_nll, rmse
from .synth import make_tt_regression
from .tensor_ops import MultiIndexMap, TensorTrain

__all__ = [
    "CorePosterior",
    "Dataset",
    "ExactGPRegressor",
    "LaplaceTTKMRegressor",
    "MultiIndexMap",
    "PrecisionPosterior",
    "PredictiveDistribution",
    "Standardizer",
    "TensorProductFeatures",
    "TensorTrain",
    "cyclic_shift",
    "gaussian_nll",
    "load_csv",
    "make_tt_regression",
    "rmse",
    "split",
]

__version__ = "0.1.0"
