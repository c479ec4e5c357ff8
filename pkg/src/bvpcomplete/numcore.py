"""Dense complex linear algebra for small matrices.

Everything here operates on plain ``numpy`` arrays of ``complex128``.  The
matrices that occur in this package are tiny (n <= ~8), so the routines
favour robustness near singular points over speed: the adjugate falls back
to explicit cofactors whenever the determinant is small, because downstream
code evaluates it exactly at zeros of a determinant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, SingularMatrixError

__all__ = [
    "Tolerance",
    "det",
    "adjugate",
    "nullspace",
    "mat_exp",
    "solve",
]


@dataclass(frozen=True)
class Tolerance:
    """Relative/absolute tolerance pair used by rank and singularity tests."""

    rel: float = 1e-10
    abs: float = 0.0

    def __post_init__(self):
        if self.rel < 0 or self.abs < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.rel == 0 and self.abs == 0:
            raise ValueError("rel and abs tolerance cannot both be zero")


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"empty matrix of shape {a.shape}")
    if not np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag)):
        raise ValueError("matrix entries must be finite")
    return a


def _as_square(m) -> np.ndarray:
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def det(m) -> complex:
    """Determinant via LU with partial pivoting; exact for 1x1 input."""
    a = _as_square(m)
    if a.shape[0] == 1:
        return complex(a[0, 0])
    return complex(np.linalg.det(a))


def _cofactor_matrix(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    cof = np.empty((n, n), dtype=complex)
    rows = np.arange(n)
    for i in range(n):
        for j in range(n):
            minor = a[np.ix_(rows != i, rows != j)]
            cof[i, j] = (-1) ** (i + j) * (np.linalg.det(minor) if n > 1 else 1.0)
    return cof


def adjugate(m) -> np.ndarray:
    """Adjugate matrix, satisfying ``m @ adjugate(m) == det(m) * I``.

    Computed from cofactors for n <= 4 and for (near-)singular input, via
    ``det(m) * inv(m)`` otherwise.  Defined for singular matrices.
    """
    a = _as_square(m)
    n = a.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    if n <= 4:
        return _cofactor_matrix(a).T
    d = det(a)
    scale = np.linalg.norm(a, "fro") / np.sqrt(n)
    if abs(d) <= 1e-10 * scale**n:
        return _cofactor_matrix(a).T
    return d * np.linalg.inv(a)


def nullspace(m, tol: Tolerance = Tolerance()) -> np.ndarray:
    """Orthonormal basis of the numerical kernel of ``m``.

    Returns an array of shape ``(cols, k)`` whose columns span the kernel.
    Singular values sigma <= tol.rel * sigma_max + tol.abs are treated as
    zero.  For the zero matrix every direction is returned.
    """
    a = _as_matrix(m)
    _, s, vh = np.linalg.svd(a)
    smax = s[0] if s.size else 0.0
    cut = tol.rel * smax + tol.abs
    rank = int(np.sum(s > cut))
    return vh[rank:].conj().T


def mat_exp(m) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring with Pade approximation)."""
    return scipy.linalg.expm(_as_square(m))


def solve(m, rhs, tol: Tolerance = Tolerance()) -> np.ndarray:
    """Solve ``m @ x = rhs`` for well-conditioned square ``m``.

    Raises ``SingularMatrixError`` (carrying a condition estimate) when the
    smallest singular value is below ``tol.rel`` times the largest.
    """
    a = _as_square(m)
    b = np.asarray(rhs, dtype=complex)
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= tol.rel * s[0] + tol.abs:
        cond = np.inf if s[-1] == 0 else s[0] / s[-1]
        raise SingularMatrixError(
            f"matrix is singular to tolerance (cond ~ {cond:.3e})", condition=cond
        )
    return np.linalg.solve(a, b)
