"""Standard-form conic programs and their primal-dual solutions.

The primal problem is::

    minimize    c @ x
    subject to  A @ x == b,   x in K

with ``K`` a product of free, nonnegative and PSD blocks, and the dual is::

    maximize    b @ y
    subject to  A.T @ y + s == c,   s in K*

where ``K*`` replaces each free block by ``{0}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import InvalidInputError
from .cones import Cone, cone_violation

STATUSES = ("optimal", "primal_infeasible", "dual_infeasible", "max_iter",
            "numerical_failure")


@dataclass(frozen=True, eq=False)
class ConicProgram:
    """Immutable standard-form conic program (minimization)."""

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    cones: tuple[Cone, ...]

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        A = sp.csr_matrix(self.A, dtype=float)
        cones = tuple(self.cones)
        dim = sum(cone.dim for cone in cones)
        if c.size != dim:
            raise InvalidInputError(f"objective has {c.size} entries, cones need {dim}")
        if A.shape != (b.size, dim):
            raise InvalidInputError(
                f"A has shape {A.shape}, expected ({b.size}, {dim})")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b))
                and np.all(np.isfinite(A.data))):
            raise InvalidInputError("program data must be finite")
        for arr in (c, b):
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "cones", cones)

    @property
    def dim(self) -> int:
        return self.c.size

    @property
    def n_eq(self) -> int:
        return self.b.size

    def block_slices(self) -> list[slice]:
        out, start = [], 0
        for cone in self.cones:
            out.append(slice(start, start + cone.dim))
            start += cone.dim
        return out

    @classmethod
    def from_triplets(cls, c, rows, cols, vals, b, cones):
        """Build a program from ``(row, col, value)`` equality triplets."""
        cones = tuple(cones)
        dim = sum(cone.dim for cone in cones)
        A = sp.coo_matrix((vals, (rows, cols)), shape=(len(b), dim)).tocsr()
        return cls(np.asarray(c, dtype=float), A, np.asarray(b, dtype=float), cones)


@dataclass
class ConicSolution:
    """Primal-dual output of :func:`sparsehinf.sdp.solve`.

    For ``optimal`` the vectors are the recovered solution. For an
    infeasibility status they form the improving ray: ``y`` (with ``s``) for
    ``primal_infeasible`` and ``x`` for ``dual_infeasible``.
    """

    status: str
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    obj_primal: float
    obj_dual: float
    residuals: dict
    iterations: int = 0
    trace: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


@dataclass(frozen=True)
class ResidualReport:
    """Residuals recomputed from program data alone."""

    primal: float
    dual: float
    gap: float
    x_cone: float
    s_cone: float

    def within(self, prog: ConicProgram, tol: float = 1e-7) -> bool:
        return (self.primal <= tol * (1 + np.linalg.norm(prog.b))
                and self.dual <= tol * (1 + np.linalg.norm(prog.c))
                and self.gap <= tol and self.x_cone <= tol and self.s_cone <= tol)

    def as_dict(self) -> dict:
        return {"primal": self.primal, "dual": self.dual, "gap": self.gap,
                "x_cone": self.x_cone, "s_cone": self.s_cone}


def residual_report(prog: ConicProgram, x, y, s) -> ResidualReport:
    x, y, s = (np.asarray(v, dtype=float) for v in (x, y, s))
    if x.size != prog.dim or s.size != prog.dim or y.size != prog.n_eq:
        raise InvalidInputError("solution dimensions do not match the program")
    pobj = float(prog.c @ x)
    dobj = float(prog.b @ y)
    return ResidualReport(
        primal=float(np.linalg.norm(prog.A @ x - prog.b)),
        dual=float(np.linalg.norm(prog.A.T @ y + s - prog.c)),
        gap=abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj)),
        x_cone=cone_violation(prog.cones, x),
        s_cone=cone_violation(prog.cones, s, dual=True),
    )


def check_solution(prog: ConicProgram, sol: ConicSolution) -> ResidualReport:
    """Recompute residuals and cone violations of ``sol`` from scratch.

    ``primal`` and ``dual`` are absolute norms of ``A x - b`` and
    ``A.T y + s - c``; ``gap`` is relative; the cone entries are the largest
    negative part (eigenvalue or entry) in ``x`` and ``s``.
    """
    return residual_report(prog, sol.x, sol.y, sol.s)
