"""SDPA sparse-format export.

SDPA files describe ``max <F0, Y> s.t. <Fi, Y> = ci, Y >= 0`` over a
block-diagonal ``Y``. A :class:`ConicProgram` ``min c@x, A x = b, x in K``
maps onto it with ``Y <-> x``, ``Fi <-> row i of A``, ``ci <-> b_i`` and
``F0 = -C``. Free blocks are split into differences of nonnegative pairs;
nonnegative blocks become diagonal blocks (negative size in the header).
"""

from __future__ import annotations

import numpy as np

from .cones import triu_indices
from .program import ConicProgram


def _fmt(v: float) -> str:
    return f"{v + 0.0:.17g}"


def _coordinate_map(prog: ConicProgram):
    """For every scalar coordinate: list of (block, i, j, factor)."""
    entries = []
    block_sizes = []
    blk = 0
    for cone in prog.cones:
        if cone.dim == 0:
            continue
        blk += 1
        if cone.kind == "free":
            d = cone.size
            block_sizes.append(-2 * d)
            for k in range(d):
                entries.append([(blk, k + 1, k + 1, 1.0), (blk, d + k + 1, d + k + 1, -1.0)])
        elif cone.kind == "nonneg":
            block_sizes.append(-cone.size)
            for k in range(cone.size):
                entries.append([(blk, k + 1, k + 1, 1.0)])
        else:
            block_sizes.append(cone.size)
            iu, ju = triu_indices(cone.size)
            for i, j in zip(iu, ju):
                factor = 1.0 if i == j else 1.0 / np.sqrt(2.0)
                entries.append([(blk, i + 1, j + 1, factor)])
    return entries, block_sizes


def export_sdpa(prog: ConicProgram, comment: str = "exported by sparsehinf") -> str:
    """Render ``prog`` in SDPA sparse format (``.dat-s``)."""
    coord, sizes = _coordinate_map(prog)
    lines = [f'"{comment}', str(prog.n_eq), str(len(sizes))]
    lines.append(" ".join(str(s) for s in sizes) if sizes else "")
    lines.append(" ".join(_fmt(v) for v in prog.b) if prog.n_eq else "")

    def emit(matno, col, value):
        for blk, i, j, factor in coord[col]:
            v = value * factor
            if v != 0.0:
                lines.append(f"{matno} {blk} {i} {j} {_fmt(v)}")

    for col in np.flatnonzero(prog.c):
        emit(0, col, -prog.c[col])
    A = prog.A.tocsr()
    for row in range(prog.n_eq):
        start, stop = A.indptr[row], A.indptr[row + 1]
        order = np.argsort(A.indices[start:stop], kind="stable")
        for col, val in zip(A.indices[start:stop][order], A.data[start:stop][order]):
            emit(row + 1, col, val)
    return "\n".join(lines) + "\n"
