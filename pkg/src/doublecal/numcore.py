"""Small dense symmetric linear algebra.

Matrices here are tiny (a constant plus a handful of auxiliaries), so the
factorisation is written out explicitly; that lets a failing pivot be
reported by index instead of surfacing as a generic LinAlgError.
"""

from __future__ import annotations

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

SINGULARITY_TOL = 1e-12


class SingularSystem(np.linalg.LinAlgError):
    """Raised when a matrix is not (numerically) symmetric positive definite."""

    def __init__(self, message: str, pivot: int, context: str | None = None):
        self.pivot = pivot
        self.context = context
        if context:
            message = f"{context}: {message}"
        super().__init__(message)


def sym_matrix(a: npt.ArrayLike) -> FloatArray:
    """Return `a` as a float matrix with exactly symmetric storage."""
    m = np.array(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    return 0.5 * (m + m.T)


def cholesky(a: npt.ArrayLike, tol: float = SINGULARITY_TOL) -> FloatArray:
    """Lower-triangular L with L @ L.T == a.

    Raises SingularSystem naming the first leading minor whose pivot is not
    larger than ``tol`` times the largest diagonal entry.
    """
    m = sym_matrix(a)
    k = m.shape[0]
    scale = float(np.max(np.abs(np.diag(m))))
    threshold = tol * scale if scale > 0 else 0.0
    low = np.zeros_like(m)
    for j in range(k):
        pivot = m[j, j] - low[j, :j] @ low[j, :j]
        if not pivot > threshold:
            raise SingularSystem(
                f"matrix is not positive definite: leading minor {j + 1} "
                f"has pivot {pivot:.3e}",
                pivot=j,
            )
        low[j, j] = np.sqrt(pivot)
        if j + 1 < k:
            low[j + 1 :, j] = (m[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return low


def cho_solve(low: FloatArray, b: npt.ArrayLike) -> FloatArray:
    """Solve (L L^t) v = b given the Cholesky factor L."""
    rhs = np.asarray(b, dtype=np.float64)
    k = low.shape[0]
    w = np.empty_like(rhs)
    for i in range(k):
        w[i] = (rhs[i] - low[i, :i] @ w[:i]) / low[i, i]
    v = np.empty_like(rhs)
    for i in reversed(range(k)):
        v[i] = (w[i] - low[i + 1 :, i] @ v[i + 1 :]) / low[i, i]
    return v


def solve_spd(
    a: npt.ArrayLike,
    b: npt.ArrayLike,
    tol: float = SINGULARITY_TOL,
    context: str | None = None,
) -> FloatArray:
    """Solve a @ v = b for symmetric positive definite `a`."""
    try:
        low = cholesky(a, tol=tol)
    except SingularSystem as err:
        raise SingularSystem(str(err), pivot=err.pivot, context=context) from None
    rhs = np.asarray(b, dtype=np.float64)
    if rhs.shape[0] != low.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {low.shape}, rhs {rhs.shape}")
    return cho_solve(low, rhs)


def determinant(a: npt.ArrayLike) -> float:
    return float(np.linalg.det(np.asarray(a, dtype=np.float64)))
