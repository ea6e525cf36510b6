"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class SparseHinfError(Exception):
    """Base class for all errors raised by :mod:`sparsehinf`."""


class InvalidInputError(SparseHinfError, ValueError):
    """Malformed arguments: wrong shapes, out-of-range indices, non-finite data."""


class StabilityError(SparseHinfError):
    """The system (or a generated system) is not asymptotically stable."""


class SingularMatrixError(SparseHinfError, ArithmeticError):
    """A linear system is singular to working precision."""


class NotPSDError(SparseHinfError, ArithmeticError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class GenerationError(SparseHinfError):
    """A random generator exhausted its resampling budget."""


class BudgetError(SparseHinfError):
    """An exhaustive search would exceed the configured subset budget."""


class SolverError(SparseHinfError):
    """The conic solver did not return an optimal solution.

    Attributes
    ----------
    status : str
        The solver status (``primal_infeasible``, ``max_iter``, ...).
    """

    def __init__(self, message: str, status: str, solution=None):
        super().__init__(f"{message} (status: {status})")
        self.status = status
        self.solution = solution


class ConsistencyError(SparseHinfError):
    """Bounds that must be ordered came out of order (solver or oracle bug)."""


class SynthesisError(SparseHinfError):
    """Controller synthesis failed; ``stage`` says where."""

    def __init__(self, message: str, stage: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
