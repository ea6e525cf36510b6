"""Minimal SDPA sparse-format reader used as an independent round-trip check."""

import numpy as np


def read_sdpa(text: str) -> dict:
    """Parse ``.dat-s`` text into sizes, the right-hand side and dense block matrices.

    Returns a dict with ``m`` (constraint count), ``sizes`` (signed block
    sizes), ``c`` (right-hand side) and ``F`` where ``F[i][b]`` is the dense
    symmetric block ``b`` of matrix ``i`` (``i = 0`` is the objective).
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and ln[0] not in '"*']
    m = int(lines[0].split()[0])
    nblocks = int(lines[1].split()[0])
    sizes = [int(v) for v in lines[2].replace(",", " ").replace("{", " ").replace("}", " ").split()]
    assert len(sizes) == nblocks
    c = np.array([float(v) for v in lines[3].replace(",", " ").split()]) if m else np.zeros(0)
    F = [[np.zeros((abs(s), abs(s))) for s in sizes] for _ in range(m + 1)]
    nnz = 0
    for ln in lines[4:]:
        mat, blk, i, j, v = ln.split()
        M = F[int(mat)][int(blk) - 1]
        M[int(i) - 1, int(j) - 1] = M[int(j) - 1, int(i) - 1] = float(v)
        nnz += 1
    return {"m": m, "sizes": sizes, "c": c, "F": F, "nnz": nnz}


def inner(F_blocks, Y_blocks) -> float:
    return float(sum(np.sum(F * Y) for F, Y in zip(F_blocks, Y_blocks)))
