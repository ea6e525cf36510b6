"""Cone descriptions and the symmetric vectorization used by the solver.

A PSD block of order ``p`` is stored as ``svec(X)``: the upper triangle in
row-major order, with off-diagonal entries multiplied by ``sqrt(2)`` so that
``svec(X) @ svec(Y) == trace(X @ Y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import InvalidInputError

SQRT2 = np.sqrt(2.0)
KINDS = ("free", "nonneg", "psd")


@dataclass(frozen=True)
class Cone:
    """One block of the product cone.

    ``size`` is the vector length for ``free``/``nonneg`` blocks and the
    matrix order for ``psd`` blocks.
    """

    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown cone kind {self.kind!r}")
        if int(self.size) != self.size or self.size < 0:
            raise InvalidInputError(f"invalid cone size {self.size!r}")

    @property
    def dim(self) -> int:
        """Number of scalar coordinates occupied by the block."""
        if self.kind == "psd":
            return self.size * (self.size + 1) // 2
        return self.size

    @property
    def degree(self) -> int:
        """Barrier degree (contribution to the complementarity count)."""
        return 0 if self.kind == "free" else self.size


@lru_cache(maxsize=64)
def triu_indices(p: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(p)


@lru_cache(maxsize=64)
def svec_scale(p: int) -> np.ndarray:
    i, j = triu_indices(p)
    return np.where(i == j, 1.0, SQRT2)


def svec_dim(p: int) -> int:
    return p * (p + 1) // 2


def order_from_dim(d: int) -> int:
    p = int(round((np.sqrt(8 * d + 1) - 1) / 2))
    if svec_dim(p) != d:
        raise InvalidInputError(f"{d} is not a triangular number")
    return p


def svec(X) -> np.ndarray:
    """Scaled upper-triangle vectorization of symmetric ``X`` (or a stack)."""
    X = np.asarray(X, dtype=float)
    p = X.shape[-1]
    i, j = triu_indices(p)
    return X[..., i, j] * svec_scale(p)


def smat(v) -> np.ndarray:
    """Inverse of :func:`svec`; accepts a stack of vectors along axis 0."""
    v = np.asarray(v, dtype=float)
    p = order_from_dim(v.shape[-1])
    i, j = triu_indices(p)
    out = np.zeros(v.shape[:-1] + (p, p))
    vals = v / svec_scale(p)
    out[..., i, j] = vals
    out[..., j, i] = vals
    return out


def identity_point(cones) -> np.ndarray:
    """Central point ``e`` of the product cone (zeros on free blocks)."""
    parts = []
    for cone in cones:
        if cone.kind == "free":
            parts.append(np.zeros(cone.dim))
        elif cone.kind == "nonneg":
            parts.append(np.ones(cone.dim))
        else:
            parts.append(svec(np.eye(cone.size)))
    return np.concatenate(parts) if parts else np.zeros(0)


def cone_violation(cones, v, dual: bool = False) -> float:
    """Distance-like violation of membership of ``v`` in the product cone.

    Nonnegative entries and PSD eigenvalues contribute their negative part;
    with ``dual=True`` free blocks belong to the dual cone ``{0}`` and
    contribute their largest magnitude.
    """
    worst = 0.0
    start = 0
    for cone in cones:
        blk = v[start:start + cone.dim]
        start += cone.dim
        if blk.size == 0:
            continue
        if cone.kind == "free":
            if dual:
                worst = max(worst, float(np.max(np.abs(blk))))
        elif cone.kind == "nonneg":
            worst = max(worst, float(-np.min(blk)))
        else:
            worst = max(worst, float(-np.linalg.eigvalsh(smat(blk))[0]))
    return worst
