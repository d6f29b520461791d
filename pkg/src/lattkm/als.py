"""Alternating least squares over the cores of a tensor-train kernel machine.

Each core update solves the regularized normal equations

    (A^T A + lam I) vec(V^(d)) = A^T y,     A = Q^(d) (*) Phi^(d) (*) P^(d)

where ``(*)`` is the row-wise Khatri-Rao product, ``P^(d)`` contracts the cores
left of ``d`` with their features and ``Q^(d)`` those to the right. ``P`` and
``Q`` are cached and advanced one core at a time during a sweep.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import RankDeficiencyError, ShapeError
from .tensor_ops import (
    TensorTrain,
    contract_core,
    contract_core_right,
    tt_dot_features,
    unvec_core,
    vec_core,
)

logger = logging.getLogger(__name__)


class StaleCacheError(RuntimeError):
    """Interface matrices do not match the current cores."""


def resolve_ranks(ranks, n_dims: int) -> list[int]:
    """Expand an int or sequence into the interior ranks ``R_1..R_{D-1}``."""
    if np.isscalar(ranks):
        out = [int(ranks)] * (n_dims - 1)
    else:
        out = [int(r) for r in ranks]
    if len(out) != n_dims - 1:
        raise ShapeError(f"expected {n_dims - 1} interior ranks for D={n_dims}, got {len(out)}")
    if any(r < 1 for r in out):
        raise ValueError(f"ranks must be positive, got {out}")
    return out


def middle_rank_index(n_dims: int) -> int:
    """Zero-based position of the 'middle' interior rank, ``ceil((D-1)/2)`` one-based."""
    return max(int(np.ceil((n_dims - 1) / 2)) - 1, 0)


def rank_pattern(pattern: int, n_dims: int, rank: int, middle: int | None = None) -> list[int]:
    """Rank configurations used in the core ablation.

    Pattern 1 is uniform ``[R, ..., R]``; patterns 2 and 3 replace the middle
    rank by ``middle`` (defaults ``2R`` and ``max(R // 2, 1)``).
    """
    ranks = [int(rank)] * (n_dims - 1)
    if pattern == 1 or n_dims < 2:
        return ranks
    if pattern == 2:
        p = 2 * rank if middle is None else int(middle)
        if p <= rank:
            raise ValueError(f"pattern 2 needs a middle rank > {rank}, got {p}")
    elif pattern == 3:
        p = max(rank // 2, 1) if middle is None else int(middle)
        if p >= rank:
            raise ValueError(f"pattern 3 needs a middle rank < {rank}, got {p}")
    else:
        raise ValueError(f"unknown rank pattern {pattern}")
    ranks[middle_rank_index(n_dims)] = p
    return ranks


def init_weights(ranks: Sequence[int], n_dims: int, n_basis: int, seed=None) -> TensorTrain:
    """Gaussian cores with standard deviation ``(I R_{d-1} R_d) ** -0.5``."""
    ranks = resolve_ranks(ranks, n_dims)
    full = [1] + ranks + [1]
    rng = np.random.default_rng(seed)
    cores = []
    for d in range(n_dims):
        shape = (full[d], n_basis, full[d + 1])
        cores.append(rng.standard_normal(shape) / np.sqrt(np.prod(shape)))
    return TensorTrain(cores)


class SweepState:
    """Weights, feature matrices and cached interface matrices for one ALS run.

    ``left[d]`` is ``P^(d)`` (N x R_{d-1}) and ``right[d]`` is ``Q^(d)``
    (N x R_d). Each cache entry remembers the core versions it was built from,
    so stale entries are detected instead of silently used.
    """

    def __init__(self, weights: TensorTrain, phis: Sequence[np.ndarray], reg: float = 0.0):
        self.weights = weights
        self.phis = [np.asarray(p, dtype=float) for p in phis]
        if len(self.phis) != len(weights):
            raise ShapeError(f"expected {len(weights)} feature matrices, got {len(self.phis)}")
        self.n_samples = self.phis[0].shape[0]
        for d, (phi, core) in enumerate(zip(self.phis, weights.cores)):
            if phi.shape != (self.n_samples, core.shape[1]):
                raise ShapeError(f"feature matrix {d} has shape {phi.shape}")
        self.reg = float(reg)
        D = len(weights)
        self._versions = [0] * D
        ones = np.ones((self.n_samples, 1))
        self.left: list = [None] * D
        self.right: list = [None] * D
        self._left_key: list = [None] * D
        self._right_key: list = [None] * D
        self.left[0], self._left_key[0] = ones, ()
        self.right[D - 1], self._right_key[D - 1] = ones, ()
        self.current_core = None

    @property
    def n_dims(self) -> int:
        return len(self.weights)

    def _left_valid(self, d):
        return self._left_key[d] == tuple(self._versions[:d])

    def _right_valid(self, d):
        return self._right_key[d] == tuple(self._versions[d + 1:])

    def set_core(self, d: int, core: np.ndarray):
        self.weights.cores[d] = np.ascontiguousarray(core, dtype=float)
        self._versions[d] += 1

    def prepare(self, d: int):
        """Bring ``P^(d)`` and ``Q^(d)`` up to date, advancing from the nearest valid entry."""
        k = d
        while not self._left_valid(k):
            k -= 1
        for j in range(k, d):
            self.left[j + 1] = contract_core(self.left[j], self.phis[j], self.weights.cores[j])
            self._left_key[j + 1] = tuple(self._versions[:j + 1])
        k = d
        while not self._right_valid(k):
            k += 1
        for j in range(k, d, -1):
            self.right[j - 1] = contract_core_right(self.right[j], self.phis[j], self.weights.cores[j])
            self._right_key[j - 1] = tuple(self._versions[j:])

    def recompute_caches(self):
        """From-scratch interface matrices (reference path, not used while sweeping)."""
        D, N = self.n_dims, self.n_samples
        left = [np.ones((N, 1))]
        for j in range(D - 1):
            left.append(contract_core(left[-1], self.phis[j], self.weights.cores[j]))
        right = [np.ones((N, 1))]
        for j in range(D - 1, 0, -1):
            right.append(contract_core_right(right[-1], self.phis[j], self.weights.cores[j]))
        return left, right[::-1]

    def response(self) -> np.ndarray:
        return tt_dot_features(self.weights, self.phis)


def design_matrix(state: SweepState, d: int, phi: np.ndarray | None = None) -> np.ndarray:
    """``A^(d) = Q^(d) (*) Phi^(d) (*) P^(d)``; columns ordered like ``vec(V^(d))``."""
    if not (state._left_valid(d) and state._right_valid(d)):
        raise StaleCacheError(f"interface matrices for core {d} are stale; call prepare({d})")
    phi = state.phis[d] if phi is None else phi
    return build_design(state.left[d], phi, state.right[d])


def build_design(left: np.ndarray, phi: np.ndarray, right: np.ndarray) -> np.ndarray:
    n = phi.shape[0]
    # C-order reshape of (n, q, i, p) puts p fastest, q slowest
    return np.einsum("nq,ni,np->nqip", right, phi, left, optimize=True).reshape(n, -1)


def solve_regularized(A: np.ndarray, y: np.ndarray, reg: float) -> np.ndarray:
    """Solve ``(A^T A + reg I) x = A^T y`` through a Cholesky factorization."""
    if reg < 0:
        raise ValueError(f"regularization must be >= 0, got {reg}")
    G = A.T @ A
    G[np.diag_indices_from(G)] += reg
    try:
        factor = cho_factor(G, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise RankDeficiencyError(
            "normal matrix is not positive definite; use a positive regularization "
            "(gamma > 0)") from exc
    diag = np.abs(np.diag(factor[0]))
    if reg == 0 and diag.min() ** 2 <= 1e-13 * diag.max() ** 2 * G.shape[0]:
        raise RankDeficiencyError(
            "design matrix is rank deficient at zero regularization; use gamma > 0")
    return cho_solve(factor, A.T @ y)


def update_core(state: SweepState, d: int, y: np.ndarray) -> SweepState:
    """Exact minimization of the regularized least squares loss over core ``d``."""
    state.prepare(d)
    A = design_matrix(state, d)
    v = solve_regularized(A, np.asarray(y, dtype=float), state.reg)
    state.set_core(d, unvec_core(v, state.weights.cores[d].shape))
    state.current_core = d
    return state


def objective(state: SweepState, y, beta: float = 1.0, gamma: float | None = None) -> float:
    """``beta/2 ||y - Phi g(v)||^2 + gamma/2 ||v||^2``; ``gamma`` defaults to ``beta * reg``."""
    if gamma is None:
        gamma = beta * state.reg
    r = np.asarray(y, dtype=float) - state.response()
    return 0.5 * beta * float(r @ r) + 0.5 * gamma * state.weights.squared_norm()


def epoch_schedule(n_dims: int) -> list[int]:
    """One ALS epoch: cores ``0, 1, ..., D-1, D-2, ..., 1``."""
    return list(range(n_dims)) + list(range(n_dims - 2, 0, -1))


def terminal_tail(n_dims: int, terminal_core: int) -> list[int]:
    """Extra updates appended after an epoch so ``terminal_core`` is updated last."""
    if not 0 <= terminal_core < n_dims:
        raise ValueError(f"terminal core {terminal_core} out of range for D={n_dims}")
    base = epoch_schedule(n_dims)
    if base[-1] == terminal_core:
        return []
    tail = []
    k = 0
    while True:
        tail.append(base[k % len(base)])
        if tail[-1] == terminal_core:
            return tail
        k += 1


def sweep_schedule(n_dims: int, n_epochs: int, terminal_core: int) -> list[int]:
    """Full update order for ``n_epochs`` epochs ending at ``terminal_core``."""
    return epoch_schedule(n_dims) * n_epochs + terminal_tail(n_dims, terminal_core)


def sweep(state: SweepState, y, n_epochs: int = 1, terminal_core: int = 0,
          tol: float = 1e-8) -> list[float]:
    """Run up to ``n_epochs`` ALS epochs and finish on ``terminal_core``.

    Stops early once the relative decrease of the objective over an epoch falls
    below ``tol``. Returns the objective (``beta = 1``) after every update.
    """
    y = np.asarray(y, dtype=float)
    D = state.n_dims
    base = epoch_schedule(D)
    tail = terminal_tail(D, terminal_core)
    trace = []
    prev = objective(state, y)
    for epoch in range(n_epochs):
        for d in base:
            update_core(state, d, y)
            trace.append(objective(state, y))
        cur = trace[-1]
        if abs(prev - cur) <= tol * max(abs(prev), np.finfo(float).tiny):
            logger.debug("ALS converged after %d epochs", epoch + 1)
            break
        prev = cur
    for d in tail:
        update_core(state, d, y)
        trace.append(objective(state, y))
    return trace
