"""Fisher-information limits for continuous measurements of open quantum systems.

Computes the quantum Fisher information (and hence the Cramér-Rao
sensitivity limit) for parameter estimation from continuous monitoring of
a Lindblad open system, and compares it with Monte-Carlo classical Fisher
information for photon-counting and homodyne detection records.
"""

__version__ = "0.1.0"

from . import algebra, liouvillian, model, qfi, trajectories
from .errors import QcrbError
from .model import (
    ModelSpec,
    ParameterVector,
    dephasing_qubit,
    effect_operators,
    load_model,
    save_model,
    two_level,
)
from .liouvillian import (
    build_generalized,
    build_lindblad,
    leading_eigenvalue,
    spectral_gap,
    steady_state,
)
from .qfi import (
    FisherEstimate,
    StencilConfig,
    finite_time_overlap,
    finite_time_qfi,
    qfi_rate,
    qfi_rate_matrix,
)
from .trajectories import (
    CountingRecord,
    HomodyneRecord,
    brute_force_overlap,
    cfi_rate,
    log_likelihood_counting,
    log_likelihood_homodyne,
    simulate_counting,
    simulate_homodyne,
    wtd_fisher_oracle,
)
