"""Dense numerical kernels with explicit accuracy contracts.

All routines are deterministic functions of their input bits.  The iterative
solvers start from a fixed vector rather than a random one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import EigNoConvergence, NonFinite, Singular

__all__ = [
    "EigResult",
    "sym_eig",
    "sym_eig_topk",
    "perron_pair",
    "solve_linear",
]

SMALL_RESIDUAL = 1e-9
LARGE_RESIDUAL = 1e-7
SMALL_DIM = 64
KRYLOV_DIM = 40


@dataclass(frozen=True, slots=True)
class EigResult:
    """Eigenvalues in decreasing order with aligned orthonormal columns."""

    values: NDArray[np.float64]
    vectors: NDArray[np.float64]
    residual_bound: float

    @property
    def top(self) -> tuple[float, NDArray[np.float64]]:
        return float(self.values[0]), self.vectors[:, 0]


def _as_symmetric(A: ArrayLike, operation: str) -> NDArray[np.float64]:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{operation}: expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite(f"{operation}: matrix has non-finite entries", operation=operation)
    return 0.5 * (A + A.T)


def _residual_bound(A: NDArray[np.float64], values: NDArray[np.float64], vectors: NDArray[np.float64]) -> float:
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if scale == 0.0:
        scale = 1.0
    resid = A @ vectors - vectors * values
    return float(np.max(np.linalg.norm(resid, axis=0)) / scale)


def sym_eig(A: ArrayLike) -> EigResult:
    """Full eigendecomposition of a symmetric matrix (LAPACK ``syevd``)."""
    A = _as_symmetric(A, "sym_eig")
    w, V = np.linalg.eigh(A)
    w = w[::-1].copy()
    V = V[:, ::-1].copy()
    return EigResult(values=w, vectors=V, residual_bound=_residual_bound(A, w, V))


def sym_eig_topk(A: ArrayLike, k: int = 1, *, tol: float = 1e-10) -> EigResult:
    """Top ``k`` eigenpairs via implicitly restarted Lanczos.

    Small matrices go through the dense path; ARPACK needs ``k < n``.
    """
    A = _as_symmetric(A, "sym_eig_topk")
    n = A.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"sym_eig_topk: k={k} out of range for n={n}")
    if n <= max(SMALL_DIM, k + 1):
        full = sym_eig(A)
        return EigResult(full.values[:k].copy(), full.vectors[:, :k].copy(), full.residual_bound)

    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        ncv = min(n, max(2 * k + 1, KRYLOV_DIM))
        w, V = eigsh(A, k=k, which="LA", v0=v0, ncv=ncv, tol=tol, maxiter=50 * n)
    except ArpackNoConvergence as exc:
        raise EigNoConvergence("sym_eig_topk: Lanczos did not converge", operation="sym_eig_topk") from exc
    order = np.argsort(w)[::-1]
    w = w[order]
    V = V[:, order]
    bound = _residual_bound(A, w, V)
    if bound > LARGE_RESIDUAL:
        raise EigNoConvergence(
            f"sym_eig_topk: residual {bound:.2e} above {LARGE_RESIDUAL:.0e}",
            operation="sym_eig_topk",
        )
    return EigResult(values=w, vectors=V, residual_bound=bound)


def perron_pair(
    A: ArrayLike, *, tol: float = 1e-10, max_iter: int = 10_000
) -> tuple[float, NDArray[np.float64]]:
    """Perron root and unit positive eigenvector of an entrywise-positive matrix.

    Plain power iteration started from the uniform vector.  Works for
    non-symmetric positive matrices too (e.g. ``D_g Omega``).
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"perron_pair: expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite("perron_pair: matrix has non-finite entries", operation="perron_pair")
    if np.any(A <= 0.0):
        raise ValueError("perron_pair: matrix must be entrywise positive")

    n = A.shape[0]
    norm = float(np.linalg.norm(A, 2))
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        lam = float(np.linalg.norm(w))
        v = w / lam
        if np.linalg.norm(A @ v - lam * v) <= tol * norm:
            return lam, v
    raise EigNoConvergence(
        f"perron_pair: no convergence after {max_iter} iterations", operation="perron_pair", value=lam
    )


def solve_linear(A: ArrayLike, b: ArrayLike, *, max_cond: float = 1e14) -> NDArray:
    """Solve ``A x = b`` refusing numerically singular systems."""
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"solve_linear: expected a square matrix, got shape {A.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise NonFinite("solve_linear: non-finite input", operation="solve_linear")
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > max_cond:
        raise Singular(f"solve_linear: condition estimate {cond:.3e}", operation="solve_linear", cond=cond)
    return np.linalg.solve(A, b)
