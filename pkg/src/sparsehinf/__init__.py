"""Sparse worst-case gains of linear systems and controller synthesis."""

from .errors import (
    BudgetError,
    ConsistencyError,
    GenerationError,
    InvalidInputError,
    NotPSDError,
    SingularMatrixError,
    SolverError,
    SparseHinfError,
    StabilityError,
    SynthesisError,
)
from .hinf import GainResult, brl_check, hinf_norm, min_gain
from .ksparse import (
    DualCertificate,
    RelaxationResult,
    SandwichResult,
    build_dual_sdp,
    build_lower_sdp,
    build_upper_sdp,
    duality_gap,
    exact_exhaustive,
    l1_bound_check,
    round_channels,
    sandwich,
    sdp_dual,
    sdp_lower,
    sdp_upper,
)
from .statespace import StateSpace, freq_response, restrict_channels, validate

__version__ = "0.1.0"
