"""Index arithmetic, Kronecker-type products and tensor-train contractions.

Conventions used across the package:

* all indices are zero-based;
* in ``kron(b, a)`` the right operand ``a`` is the FAST index, so that
  ``phi(x) = phi_D(x_D) kron ... kron phi_1(x_1)`` has dimension 1 fastest;
* a core has shape ``(R_{d-1}, I_d, R_d)`` and is vectorized with the left
  rank index fastest and the right rank index slowest (Fortran order).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .exceptions import ExpansionTooLargeError, ShapeError

DEFAULT_EXPANSION_CAP = 10**6


class MultiIndexMap:
    """Bijection between multi-indices ``(i_1, ..., i_D)`` and linear indices.

    The first mode varies fastest:
    ``i = i_1 + sum_{d>=2} i_d * prod_{j<d} I_j``.
    """

    def __init__(self, mode_sizes: Sequence[int]):
        sizes = [int(s) for s in mode_sizes]
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"mode sizes must be positive, got {mode_sizes!r}")
        self.mode_sizes = sizes
        self._strides = np.cumprod([1] + sizes[:-1])

    @property
    def size(self) -> int:
        return int(np.prod(self.mode_sizes))

    def flatten(self, indices: Sequence[int]) -> int:
        if len(indices) != len(self.mode_sizes):
            raise IndexError(
                f"expected {len(self.mode_sizes)} indices, got {len(indices)}")
        for d, (i, n) in enumerate(zip(indices, self.mode_sizes)):
            if not 0 <= i < n:
                raise IndexError(f"index {i} out of range [0, {n}) in mode {d}")
        return int(sum(int(i) * int(s) for i, s in zip(indices, self._strides)))

    def unflatten(self, linear: int) -> tuple[int, ...]:
        if not 0 <= linear < self.size:
            raise IndexError(f"linear index {linear} out of range [0, {self.size})")
        out = []
        for n in self.mode_sizes:
            out.append(int(linear % n))
            linear //= n
        return tuple(out)


def flatten_index(indices: Sequence[int], mode_sizes: Sequence[int]) -> int:
    return MultiIndexMap(mode_sizes).flatten(indices)


def kron(b, a) -> np.ndarray:
    """Kronecker product of two vectors; ``result[i + j*len(a)] = a[i]*b[j]``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return np.outer(b, a).ravel()


def khatri_rao_rows(B, A) -> np.ndarray:
    """Row-wise Khatri-Rao product: row ``n`` equals ``kron(B[n], A[n])``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2:
        raise ShapeError("khatri_rao_rows expects two matrices")
    if A.shape[0] != B.shape[0]:
        raise ShapeError(
            f"row count mismatch: {B.shape[0]} (left) vs {A.shape[0]} (right)")
    return (B[:, :, None] * A[:, None, :]).reshape(A.shape[0], -1)


def vec_core(core: np.ndarray) -> np.ndarray:
    """Vectorize a core with the left-rank index fastest."""
    return np.asarray(core).reshape(-1, order="F")


def unvec_core(v: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(shape, order="F")


class TensorTrain:
    """Ordered list of TT-cores ``V^(d)`` of shape ``(R_{d-1}, I_d, R_d)``."""

    def __init__(self, cores: Sequence[np.ndarray]):
        cores = [np.array(c, dtype=float) for c in cores]
        if not cores:
            raise ShapeError("a tensor train needs at least one core")
        for d, c in enumerate(cores):
            if c.ndim != 3:
                raise ShapeError(f"core {d} must be 3-way, got shape {c.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ShapeError("boundary ranks must equal 1")
        for d in range(len(cores) - 1):
            if cores[d].shape[2] != cores[d + 1].shape[0]:
                raise ShapeError(
                    f"rank mismatch between cores {d} and {d + 1}: "
                    f"{cores[d].shape[2]} != {cores[d + 1].shape[0]}")
        self.cores = cores

    def __len__(self):
        return len(self.cores)

    @property
    def mode_sizes(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def ranks(self) -> list[int]:
        """Interior ranks ``R_1..R_{D-1}``."""
        return [c.shape[2] for c in self.cores[:-1]]

    @property
    def n_params(self) -> int:
        return int(sum(c.size for c in self.cores))

    def copy(self) -> "TensorTrain":
        return TensorTrain([c.copy() for c in self.cores])

    def squared_norm(self) -> float:
        return float(sum(np.sum(c**2) for c in self.cores))

    def to_vector(self) -> np.ndarray:
        """Concatenation of all vectorized cores, ``v = [v^(1), ..., v^(D)]``."""
        return np.concatenate([vec_core(c) for c in self.cores])


def tt_full_vector(w: TensorTrain, cap: int = DEFAULT_EXPANSION_CAP) -> np.ndarray:
    """Dense weight vector ``g(v)`` of length ``prod(I_d)``, first mode fastest."""
    total = int(np.prod(w.mode_sizes, dtype=np.int64))
    if total > cap:
        raise ExpansionTooLargeError(
            f"expansion too large: {total} entries exceeds cap {cap}")
    # rows: multi-index over modes processed so far (first mode fastest)
    M = w.cores[0][0]  # (I_1, R_1)
    for core in w.cores[1:]:
        T = np.einsum("ar,ris->ias", M, core)
        M = T.reshape(-1, core.shape[2])
    return M[:, 0].copy()


def _check_features(w: TensorTrain, phis: Sequence[np.ndarray]) -> int:
    if len(phis) != len(w):
        raise ShapeError(f"expected {len(w)} feature matrices, got {len(phis)}")
    n = phis[0].shape[0]
    for d, (phi, core) in enumerate(zip(phis, w.cores)):
        if phi.ndim != 2 or phi.shape[0] != n or phi.shape[1] != core.shape[1]:
            raise ShapeError(
                f"feature matrix {d} has shape {phi.shape}, expected ({n}, {core.shape[1]})")
    return n


def contract_core(left: np.ndarray, phi: np.ndarray, core: np.ndarray) -> np.ndarray:
    """One left-to-right step: ``out[n,s] = sum_{r,i} left[n,r] phi[n,i] core[r,i,s]``."""
    return np.einsum("nr,ris,ni->ns", left, core, phi, optimize=True)


def contract_core_right(right: np.ndarray, phi: np.ndarray, core: np.ndarray) -> np.ndarray:
    """One right-to-left step: ``out[n,r] = sum_{i,s} core[r,i,s] phi[n,i] right[n,s]``."""
    return np.einsum("ris,ns,ni->nr", core, right, phi, optimize=True)


def tt_dot_features(w: TensorTrain, phis: Sequence[np.ndarray]) -> np.ndarray:
    """Model response ``Phi @ g(v)`` without forming the exponential feature matrix."""
    phis = [np.asarray(p, dtype=float) for p in phis]
    n = _check_features(w, phis)
    z = np.ones((n, 1))
    for phi, core in zip(phis, w.cores):
        z = contract_core(z, phi, core)
    return z[:, 0]
