"""Exception types raised by lattkm."""

from sklearn.exceptions import NotFittedError

__all__ = [
    "ShapeError",
    "ExpansionTooLargeError",
    "RankDeficiencyError",
    "DegenerateFeatureError",
    "DataError",
    "NotFittedError",
]


class ShapeError(ValueError):
    pass


class ExpansionTooLargeError(ValueError):
    """Raised when a dense expansion of a tensor train would exceed the cap."""


class RankDeficiencyError(ValueError):
    """Raised when a normal-equation matrix is not positive definite."""


class DegenerateFeatureError(ValueError):
    pass


class DataError(ValueError):
    """Invalid or non-finite input data (carries row/column location when known)."""
