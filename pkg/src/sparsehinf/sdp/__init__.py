"""Conic programming: program model, interior-point solver, SDPA export."""

from .cones import Cone, smat, svec
from .ipm import solve
from .model import Affine, Model
from .program import ConicProgram, ConicSolution, ResidualReport, check_solution
from .sdpa import export_sdpa

__all__ = [
    "Affine",
    "Cone",
    "ConicProgram",
    "ConicSolution",
    "Model",
    "ResidualReport",
    "check_solution",
    "export_sdpa",
    "smat",
    "solve",
    "svec",
]
