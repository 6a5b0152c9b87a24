"""Vectorized Liouvillians and their leading spectral data.

The generator acts on column-major vectorized density matrices,
vec(A rho B) = (B^T kron A) vec(rho).  Two-sided generators carry one
parameter vector on the left factors and another on the right:

    L(rho) = -i H(th1) rho + i rho H(th2)
             + sum_c [ L_c(th1) rho L_c(th2)^dag
                       - (1/2) L_c(th1)^dag L_c(th1) rho
                       - (1/2) rho L_c(th2)^dag L_c(th2) ]

which reduces to the trace-preserving Lindblad generator at th1 = th2 and
otherwise propagates the two-sided overlap density matrix whose trace is
the system-environment state overlap.
"""

from dataclasses import dataclass

import numpy as np

from . import algebra
from .errors import DegenerateSteadyState, GapCollapse

# An eigenvalue counts as "zero" if its real part exceeds -ZERO_FRACTION * gap
# scale; used only for degeneracy detection of the stationary sector.
_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class SuperOp:
    """An L^2 x L^2 superoperator on column-major vectorized density matrices."""

    dim: int
    matrix: np.ndarray

    def apply(self, rho):
        return unvec(self.matrix @ vec(rho), self.dim)


@dataclass(frozen=True)
class SpectralResult:
    """Leading eigenvalue of a (generalized) Liouvillian with gap diagnostics."""

    lambda_s: complex
    gap: float
    eigenmatrix: np.ndarray
    degenerate: bool


def vec(rho):
    """Column-major vectorization."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v, dim):
    return np.asarray(v, dtype=complex).reshape((dim, dim), order="F")


def _two_sided_matrix(dim, h1, h2, jumps1, jumps2):
    eye = np.eye(dim, dtype=complex)
    mat = -1j * np.kron(eye, h1) + 1j * np.kron(h2.T, eye)
    for l1, l2 in zip(jumps1, jumps2):
        mat += np.kron(l2.conj(), l1)
        mat -= 0.5 * np.kron(eye, l1.conj().T @ l1)
        mat -= 0.5 * np.kron((l2.conj().T @ l2).T, eye)
    return mat


def build_generalized(m, theta1, theta2):
    """Two-sided generator with theta1 acting from the left, theta2 from the right."""
    return SuperOp(m.dimension, _two_sided_matrix(
        m.dimension, m.h(theta1), m.h(theta2),
        m.jump_ops(theta1), m.jump_ops(theta2)))


def build_lindblad(m, theta=None):
    """Trace-preserving Lindblad generator at a single parameter vector."""
    h = m.h(theta)
    jumps = m.jump_ops(theta)
    return SuperOp(m.dimension, _two_sided_matrix(m.dimension, h, h, jumps, jumps))


def _trace_row(dim):
    row = np.zeros(dim * dim, dtype=complex)
    row[:: dim + 1] = 1.0
    return row


def _zero_multiplicity(eigvals, scale):
    tol = max(_ZERO_TOL * max(scale, 1.0), 1e-13)
    return int(np.sum(eigvals.real > -tol))


def spectral_gap(m, theta=None):
    """-max Re of the nonzero Lindblad spectrum (sets the relaxation time)."""
    sup = build_lindblad(m, theta)
    eig = algebra.eig_general(sup.matrix)
    scale = np.linalg.norm(sup.matrix, 2)
    if _zero_multiplicity(eig.eigenvalues, scale) != 1:
        raise DegenerateSteadyState(
            "stationary sector is degenerate; no unique relaxation gap"
        )
    order = np.argsort(-eig.eigenvalues.real)
    return float(-eig.eigenvalues.real[order[1]])


def steady_state(m, theta=None):
    """Unique stationary density matrix of the Lindblad generator.

    Solved from the augmented linear system (one generator row replaced by
    the trace functional) for exact normalization; the eigendecomposition
    is used only to certify uniqueness of the stationary sector.
    """
    sup = build_lindblad(m, theta)
    eig = algebra.eig_general(sup.matrix)
    scale = np.linalg.norm(sup.matrix, 2)
    mult = _zero_multiplicity(eig.eigenvalues, scale)
    if mult != 1:
        raise DegenerateSteadyState(
            f"zero eigenvalue multiplicity {mult}; eigenvalue analysis requires "
            "a unique stationary state"
        )
    n = m.dimension * m.dimension
    a = sup.matrix.copy()
    a[0, :] = _trace_row(m.dimension)
    b = np.zeros(n, dtype=complex)
    b[0] = 1.0
    rho = unvec(algebra.solve_linear(a, b), m.dimension)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def resolve_initial_state(m, theta=None):
    """Initial density matrix for a model, resolving the "steady" token."""
    state = m.initial_state
    if isinstance(state, str):
        if state != "steady":
            raise ValueError(f"unknown initial-state token {state!r}")
        return steady_state(m, theta)
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def leading_eigenvalue(m, theta1, theta2, reference_gap=None):
    """Smoothly continued leading eigenvalue of the two-sided generator.

    Implemented as "largest real part plus separation check": for the small
    stencils used by the information computations the continuation of the
    vanishing Lindblad eigenvalue *is* the eigenvalue of maximal real part
    whenever it stays separated from the rest of the spectrum by at least
    10% of the unperturbed gap.  Raises GapCollapse otherwise.
    """
    sup = build_generalized(m, theta1, theta2)
    eig = algebra.eig_general(sup.matrix)
    order = np.argsort(-eig.eigenvalues.real)
    lam = eig.eigenvalues[order[0]]
    sep = float(lam.real - eig.eigenvalues.real[order[1]])
    if reference_gap is None:
        mid = m.params.with_values(
            0.5 * (np.asarray(theta1.values if hasattr(theta1, "values") else theta1)
                   + np.asarray(theta2.values if hasattr(theta2, "values") else theta2)))
        reference_gap = spectral_gap(m, mid)
    if sep < 0.1 * reference_gap:
        raise GapCollapse(
            f"leading-eigenvalue separation {sep:.3e} below 10% of the "
            f"unperturbed gap {reference_gap:.3e}"
        )
    return SpectralResult(
        lambda_s=complex(lam),
        gap=float(-eig.eigenvalues.real[order[1]]),
        eigenmatrix=unvec(eig.right_vectors[:, order[0]], m.dimension),
        degenerate=False,
    )
