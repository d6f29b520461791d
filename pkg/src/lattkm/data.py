"""Dataset loading, splitting, feature shifting and standardization."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import DataError, NotFittedError


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    columns: tuple = ()
    source: str = ""
    indices: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[1] < 1:
            raise DataError(f"X must be a 2-D array with at least one column, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if not self.columns:
            object.__setattr__(self, "columns", tuple(f"x{d + 1}" for d in range(X.shape[1])))
        if self.indices is None:
            object.__setattr__(self, "indices", np.arange(X.shape[0]))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], y=self.y[idx], indices=self.indices[idx])


def read_numeric_csv(path, delimiter: str = ",") -> tuple[list[str], np.ndarray]:
    """Header and numeric body of a CSV file.

    Any empty, non-numeric or non-finite cell raises :class:`DataError` naming
    the 1-based data row (header excluded) and the column.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(raw)} cells, header has {len(header)}")
            vals = []
            for col, cell in zip(header, raw):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell.strip()!r} at row {lineno}, column {col!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: missing or non-finite value at row {lineno}, column {col!r}")
                vals.append(v)
            rows.append(vals)
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def load_csv(path, target_column: str | None = None, delimiter: str = ",") -> Dataset:
    """Read a headered numeric CSV; ``target_column`` defaults to the last column."""
    header, data = read_numeric_csv(path, delimiter)
    if target_column is None:
        target_column = header[-1]
    if target_column not in header:
        raise DataError(f"{path}: target column {target_column!r} not in header {header}")
    if data.shape[0] < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {data.shape[0]}")
    t = header.index(target_column)
    feat = [j for j in range(len(header)) if j != t]
    return Dataset(data[:, feat], data[:, t], tuple(header[j] for j in feat), str(path))


def write_csv(path, dataset: Dataset, target_column: str = "y", delimiter: str = ","):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(list(dataset.columns) + [target_column])
        for xr, yv in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in xr] + [repr(float(yv))])


def split(dataset: Dataset, test_fraction: float = 0.1, seed=0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then ``ceil(N (1 - f))`` training rows and the rest for testing."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = dataset.n_samples
    n_train = math.ceil(round(n * (1.0 - test_fraction), 9))
    if not 0 < n_train < n:
        raise DataError(f"split of {n} rows with test fraction {test_fraction} leaves an empty part")
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))


def indices_hash(idx) -> str:
    return hashlib.sha256(np.asarray(idx, dtype=np.int64).tobytes()).hexdigest()[:16]


def cyclic_shift(dataset: Dataset, k: int) -> Dataset:
    """Rotate columns right by ``k``: shift 1 maps ``[x1..xD]`` to ``[xD, x1, ..., x(D-1)]``."""
    D = dataset.n_features
    if not 0 <= k < D:
        raise ValueError(f"shift must be in [0, {D}), got {k}")
    order = np.roll(np.arange(D), k)
    return replace(dataset, X=dataset.X[:, order], columns=tuple(dataset.columns[j] for j in order))


class Standardizer:
    """Z-score statistics of inputs and target, fitted on training data only.

    With ``center_target=False`` the target is only divided by its standard
    deviation and ``y_mean_`` is 0.
    """

    def __init__(self, center_target: bool = True):
        self.center_target = center_target

    def fit(self, X, y=None) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        self.x_mean_ = X.mean(axis=0)
        self.x_std_ = X.std(axis=0)
        bad = np.flatnonzero(self.x_std_ <= 0)
        if bad.size:
            raise DataError(f"input column {int(bad[0])} has zero variance on the training split")
        if y is not None:
            y = np.asarray(y, dtype=float)
            self.y_mean_ = float(y.mean()) if self.center_target else 0.0
            self.y_std_ = float(y.std())
            if not self.y_std_ > 0:
                raise DataError("target has zero variance on the training split")
        else:
            self.y_mean_, self.y_std_ = 0.0, 1.0
        return self

    def _check(self):
        if not hasattr(self, "x_mean_"):
            raise NotFittedError("Standardizer is not fitted")

    def transform(self, X) -> np.ndarray:
        self._check()
        return (np.asarray(X, dtype=float) - self.x_mean_) / self.x_std_

    def transform_y(self, y) -> np.ndarray:
        self._check()
        return (np.asarray(y, dtype=float) - self.y_mean_) / self.y_std_

    def inverse_mean(self, m):
        self._check()
        return np.asarray(m, dtype=float) * self.y_std_ + self.y_mean_

    def inverse_var(self, v):
        self._check()
        return np.asarray(v, dtype=float) * self.y_std_**2

    def to_dict(self) -> dict:
        self._check()
        return {"x_mean": self.x_mean_.tolist(), "x_std": self.x_std_.tolist(),
                "y_mean": self.y_mean_, "y_std": self.y_std_,
                "center_target": self.center_target}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        s = cls(d.get("center_target", True))
        s.x_mean_ = np.asarray(d["x_mean"], dtype=float)
        s.x_std_ = np.asarray(d["x_std"], dtype=float)
        s.y_mean_, s.y_std_ = float(d["y_mean"]), float(d["y_std"])
        return s
