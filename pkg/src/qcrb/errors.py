"""Exception hierarchy for qcrb.

Every numerical failure mode gets its own class so callers (and the CLI)
can react to the *reason* a computation failed, not just the fact.
"""


class QcrbError(Exception):
    """Base class for all qcrb errors."""


# --- linear algebra kernel ---

class SingularMatrix(QcrbError):
    """Pivot collapsed during LU factorization; matrix is numerically singular."""


class NoConvergence(QcrbError):
    """Eigensolver iteration cap exceeded."""


class StepUnderflow(QcrbError):
    """Adaptive propagation step collapsed; system too stiff for tolerance."""


# --- model construction ---

class InvalidParameter(QcrbError):
    """Physically inadmissible model parameter (e.g. non-positive decay rate)."""


class StepTooLarge(QcrbError):
    """Time step violates the first-order validity bound for the model."""


class SchemaError(QcrbError):
    """Model/config document is missing a required field or is malformed."""


class DimensionMismatch(QcrbError):
    """Operator dimensions inconsistent with the declared Hilbert dimension."""


class NonHermitianHamiltonian(QcrbError):
    """Loaded Hamiltonian is not Hermitian."""


# --- spectral analysis ---

class DegenerateSteadyState(QcrbError):
    """Zero eigenvalue of the Liouvillian has multiplicity > 1; the
    long-time eigenvalue method does not apply."""


class GapCollapse(QcrbError):
    """Continued leading eigenvalue is no longer separated from the rest
    of the spectrum; shrink the stencil."""


class OverlapUnderflow(QcrbError):
    """Two-sided overlap underflowed; T too large for the stencil step."""


# --- trajectories / likelihoods ---

class NoJumpOperators(QcrbError):
    """Counting unraveling requires at least one jump operator."""


class MultiChannelUnsupported(QcrbError):
    """Homodyne detection is implemented for a single monitored channel."""


class GridTooCoarse(QcrbError):
    """Waiting-time grid failed its refinement self-check."""


class TooManySteps(QcrbError):
    """Brute-force record enumeration limited to N <= 12 steps."""
