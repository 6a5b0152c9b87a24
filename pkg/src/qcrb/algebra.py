"""Dense complex linear-algebra kernel.

Everything here is sized for Hilbert dimensions L <= ~16, i.e. superoperators
up to 256x256, where dense LAPACK routines are both simpler and faster than
anything sparse.  The three entry points are

    solve_linear  -- LU solve with an explicit singularity guard
    eig_general   -- full eigendecomposition of a general complex matrix
    propagate     -- e^{A t} v  via scaling-and-squaring applied to v

All functions are pure; nothing is mutated.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import expm_multiply

from .errors import NoConvergence, SingularMatrix

# Relative pivot threshold below which an LU factorization is declared singular.
PIVOT_TOL = 1e-14


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues, right eigenvectors (columns) and spectral residuals."""

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    residual_norms: np.ndarray


def is_hermitian(matrix, tol=1e-12):
    """Entrywise Hermiticity check |M - M^dag| <= tol."""
    matrix = np.asarray(matrix)
    return bool(np.all(np.abs(matrix - matrix.conj().T) <= tol))


def solve_linear(a, b):
    """Solve A x = b for square complex A.

    Raises SingularMatrix when the smallest LU pivot falls below
    PIVOT_TOL times the largest one (degenerate Liouvillian upstream).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    lu, piv = la.lu_factor(a, check_finite=True)
    diag = np.abs(np.diag(lu))
    if diag.max() == 0.0 or diag.min() < PIVOT_TOL * diag.max():
        raise SingularMatrix(
            f"pivot ratio {diag.min():.3e}/{diag.max():.3e} below {PIVOT_TOL:.0e}"
        )
    return la.lu_solve((lu, piv), b)


def eig_general(a):
    """Full eigendecomposition of a general (non-Hermitian) complex matrix.

    Backed by LAPACK's Hessenberg + shifted-QR driver.  Residual norms
    ||A v - lambda v|| are returned for every pair so callers can audit
    the decomposition.
    """
    a = np.asarray(a, dtype=complex)
    try:
        vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:  # iteration cap inside LAPACK
        raise NoConvergence(str(exc)) from exc
    residuals = np.linalg.norm(a @ vecs - vecs * vals[None, :], axis=0)
    return EigenDecomposition(vals, vecs, residuals)


def propagate(a, v, t):
    """Return e^{A t} v for a dense complex generator A and duration t >= 0."""
    if t < 0:
        raise ValueError("propagation duration must be nonnegative")
    a = np.asarray(a, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if t == 0 or not np.any(a):
        return v.copy()
    return expm_multiply(a * t, v)
