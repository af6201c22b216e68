"""Dense linear-algebra backbone.

Factorizations are delegated to LAPACK (via numpy/scipy); the spectral-norm
estimator is a deterministic power iteration on M^T M so that experiment
output is reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla

PIVOT_RTOL = 1e-14
POWER_TOL = 1e-8
POWER_MAXIT = 2000
DEFAULT_SEED = 42


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class NotSpdError(np.linalg.LinAlgError):
    pass


@dataclass
class LowRankFactor:
    """Rank-r factorization X @ Y.T with orthonormal columns in X."""

    X: np.ndarray  # m x r
    Y: np.ndarray  # n x r

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.Y.ndim != 2 or self.X.shape[1] != self.Y.shape[1]:
            raise ValueError("factors must be m x r and n x r with a common r")

    @property
    def rank(self) -> int:
        return self.X.shape[1]

    def toarray(self) -> np.ndarray:
        return self.X @ self.Y.T

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.X @ (self.Y.T @ x)

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        return self.Y @ (self.X.T @ x)


def lu_factor(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partially pivoted LU: A[perm] = L @ U with unit lower triangular L."""
    A = np.asarray(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError("lu_factor expects a square matrix")
    P, L, U = sla.lu(A)
    scale = np.abs(A).max() if A.size else 0.0
    if A.size and (scale == 0.0
                   or np.abs(np.diag(U)).min() < PIVOT_RTOL * scale):
        raise SingularMatrixError("pivot below singularity threshold")
    # P @ L @ U = A, so rows perm with A[perm] = L @ U is P^T's mapping.
    perm = np.argmax(P, axis=0)
    return L, U, perm


def lu_nopivot(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Doolittle LU without pivoting; requires nonzero leading minors."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    scale = np.abs(A).max() if A.size else 0.0
    L = np.eye(n)
    U = A.copy()
    for k in range(n - 1):
        piv = U[k, k]
        if abs(piv) < PIVOT_RTOL * scale:
            raise SingularMatrixError(f"zero pivot at position {k}")
        L[k + 1:, k] = U[k + 1:, k] / piv
        U[k + 1:, k:] -= np.outer(L[k + 1:, k], U[k, k:])
        U[k + 1:, k] = 0.0
    if n and abs(U[n - 1, n - 1]) < PIVOT_RTOL * scale:
        raise SingularMatrixError(f"zero pivot at position {n - 1}")
    return L, U


def inverse(A: np.ndarray, residual_tol: float | None = None) -> np.ndarray:
    """Dense inverse via pivoted LU with an optional residual guard."""
    A = np.asarray(A, dtype=float)
    scale = np.abs(A).max() if A.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("matrix numerically singular")
    lu, piv = sla.lu_factor(A)
    if np.abs(np.diag(lu)).min() < PIVOT_RTOL * scale:
        raise SingularMatrixError("matrix numerically singular")
    inv = sla.lu_solve((lu, piv), np.eye(A.shape[0]))
    if residual_tol is not None:
        resid = np.abs(A @ inv - np.eye(A.shape[0])).max()
        if resid > residual_tol:
            raise SingularMatrixError(f"inverse residual {resid:.2e} above tolerance")
    return inv


def full_svd(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    U, s, Vt = np.linalg.svd(np.asarray(A, dtype=float), full_matrices=False)
    return U, s, Vt


def truncated_svd(A: np.ndarray, r: int) -> tuple[LowRankFactor, np.ndarray]:
    """Best rank-r approximation X Y^T; also returns all singular values.

    The approximation error in the spectral norm equals sigma_{r+1} (zero
    when r reaches the full rank); r is clamped to min(m, n).
    """
    if r < 0:
        raise ValueError("rank must be non-negative")
    U, s, Vt = full_svd(A)
    r = min(r, s.size)
    X = U[:, :r]
    Y = (Vt[:r, :].T) * s[:r]
    return LowRankFactor(X=X, Y=Y), s


class SpectralNormEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int

    def __float__(self) -> float:
        return self.value


def spectral_norm(matvec: Callable[[np.ndarray], np.ndarray],
                  rmatvec: Callable[[np.ndarray], np.ndarray],
                  n: int,
                  seed: int = DEFAULT_SEED,
                  tol: float = POWER_TOL,
                  maxit: int = POWER_MAXIT) -> SpectralNormEstimate:
    """Power iteration on M^T M; returns a lower bound of ||M||_2.

    Starts from a fixed-seed random vector and stops once the Rayleigh
    estimate changes by less than ``tol`` relative or ``maxit`` is reached.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    nv = np.linalg.norm(v)
    if nv == 0 or n == 0:
        return SpectralNormEstimate(0.0, True, 0)
    v /= nv
    est = 0.0
    for it in range(1, maxit + 1):
        u = matvec(v)
        new_est = float(np.linalg.norm(u))
        if new_est == 0.0:
            return SpectralNormEstimate(0.0, True, it)
        w = rmatvec(u)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return SpectralNormEstimate(new_est, True, it)
        v = w / nw
        if abs(new_est - est) <= tol * max(new_est, 1e-300):
            return SpectralNormEstimate(new_est, True, it)
        est = new_est
    return SpectralNormEstimate(est, False, maxit)


def spectral_norm_dense(M: np.ndarray, seed: int = DEFAULT_SEED) -> SpectralNormEstimate:
    return spectral_norm(lambda x: M @ x, lambda x: M.T @ x, M.shape[1], seed=seed)


def cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor with positive diagonal; raises NotSpdError."""
    A = np.asarray(A, dtype=float)
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise NotSpdError("matrix not symmetric")
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(str(exc)) from exc
