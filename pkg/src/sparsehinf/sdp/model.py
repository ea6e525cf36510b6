"""A small affine modeling layer that assembles :class:`ConicProgram` data.

Matrix expressions are affine maps of the scalarized variable vector, stored
as a constant matrix plus a sparse coefficient matrix whose rows follow the
row-major flattening of the expression. Each declared variable becomes one
cone block; inequality and LMI constraints introduce slack blocks tied to
their expression by equalities.

Example
-------
>>> m = Model()
>>> X = m.psd(2)
>>> m.add_eq(X[0, 0], 1.0)
>>> m.minimize(X.trace())
>>> prog = m.build()
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import InvalidInputError
from .cones import SQRT2, Cone, svec_dim
from .program import ConicProgram


def _pad(coef: sp.spmatrix, n: int) -> sp.csr_matrix:
    coef = sp.csr_matrix(coef)
    if coef.shape[1] == n:
        return coef
    return sp.csr_matrix((coef.data, coef.indices, coef.indptr), shape=(coef.shape[0], n))


class Affine:
    """Affine matrix expression ``const + reshape(coef @ x)``."""

    __array_ufunc__ = None

    def __init__(self, const, coef):
        const = np.atleast_2d(np.asarray(const, dtype=float))
        if coef.shape[0] != const.size:
            raise InvalidInputError("coefficient rows do not match expression size")
        self.const = const
        self.coef = sp.csr_matrix(coef)

    @property
    def shape(self):
        return self.const.shape

    @property
    def nvar(self):
        return self.coef.shape[1]

    @classmethod
    def constant(cls, value, nvar: int = 0) -> "Affine":
        value = np.atleast_2d(np.asarray(value, dtype=float))
        return cls(value, sp.csr_matrix((value.size, nvar)))

    def _coerce(self, other) -> "Affine":
        if isinstance(other, Affine):
            return other
        other = np.asarray(other, dtype=float)
        if other.ndim == 0:
            other = np.full(self.shape, float(other))
        return Affine.constant(other, self.nvar)

    def _align(self, other):
        other = self._coerce(other)
        if other.shape != self.shape:
            raise InvalidInputError(f"shape mismatch {self.shape} vs {other.shape}")
        n = max(self.nvar, other.nvar)
        return _pad(self.coef, n), _pad(other.coef, n), other

    def __add__(self, other):
        a, b, other = self._align(other)
        return Affine(self.const + other.const, a + b)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.const, -self.coef)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, alpha):
        alpha = float(alpha)
        return Affine(alpha * self.const, alpha * self.coef)

    __rmul__ = __mul__

    def __matmul__(self, R):
        R = np.atleast_2d(np.asarray(R, dtype=float))
        r, c = self.shape
        if R.shape[0] != c:
            raise InvalidInputError(f"cannot multiply {self.shape} by {R.shape}")
        T = sp.kron(sp.identity(r), sp.csr_matrix(R.T), format="csr")
        return Affine(self.const @ R, T @ self.coef)

    def __rmatmul__(self, L):
        L = np.atleast_2d(np.asarray(L, dtype=float))
        r, c = self.shape
        if L.shape[1] != r:
            raise InvalidInputError(f"cannot multiply {L.shape} by {self.shape}")
        T = sp.kron(sp.csr_matrix(L), sp.identity(c), format="csr")
        return Affine(L @ self.const, T @ self.coef)

    def times(self, M) -> "Affine":
        """Scalar expression times a constant matrix, e.g. ``lam.times(I)``."""
        if self.shape != (1, 1):
            raise InvalidInputError("times() needs a scalar expression")
        M = np.atleast_2d(np.asarray(M, dtype=float))
        coef = sp.kron(sp.csr_matrix(M.reshape(-1, 1)), self.coef, format="csr")
        return Affine(self.const[0, 0] * M, coef)

    @property
    def T(self):
        r, c = self.shape
        perm = np.arange(r * c).reshape(r, c).T.ravel()
        return Affine(self.const.T, self.coef[perm])

    def __getitem__(self, key):
        idx = np.arange(self.const.size).reshape(self.shape)[key]
        idx = np.atleast_2d(idx)
        return Affine(self.const.ravel()[idx.ravel()].reshape(idx.shape),
                      self.coef[idx.ravel()])

    def trace(self):
        r, c = self.shape
        if r != c:
            raise InvalidInputError("trace of a non-square expression")
        diag = np.arange(r) * (c + 1)
        return Affine([[np.trace(self.const)]], sp.csr_matrix(self.coef[diag].sum(axis=0)))

    def sum(self):
        return Affine([[self.const.sum()]], sp.csr_matrix(self.coef.sum(axis=0)))

    def sym(self):
        """Symmetric part ``(E + E.T) / 2``."""
        return 0.5 * (self + self.T)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        coef = self.coef[:, : x.size] if self.nvar > x.size else self.coef
        return self.const + (coef @ x[: coef.shape[1]]).reshape(self.shape)


def block(rows) -> Affine:
    """Assemble a block matrix from Affine expressions and constant arrays."""
    rows = [list(r) for r in rows]
    nvar = max((x.nvar for r in rows for x in r if isinstance(x, Affine)), default=0)
    heights = []
    for r in rows:
        h = {np.atleast_2d(np.asarray(x.const if isinstance(x, Affine) else x)).shape[0]
             for x in r}
        if len(h) != 1:
            raise InvalidInputError("inconsistent block heights")
        heights.append(h.pop())
    widths = [np.atleast_2d(np.asarray(x.const if isinstance(x, Affine) else x)).shape[1]
              for x in rows[0]]
    total_r, total_c = sum(heights), sum(widths)
    const = np.zeros((total_r, total_c))
    ri, ci, vv = [], [], []
    r0 = 0
    for r, h in zip(rows, heights):
        c0 = 0
        if len(r) != len(widths):
            raise InvalidInputError("ragged block rows")
        for x, w in zip(r, widths):
            if isinstance(x, Affine):
                if x.shape != (h, w):
                    raise InvalidInputError("inconsistent block widths")
                const[r0:r0 + h, c0:c0 + w] = x.const
                coo = x.coef.tocoo()
                li, lj = np.divmod(coo.row, w)
                ri.append((r0 + li) * total_c + c0 + lj)
                ci.append(coo.col)
                vv.append(coo.data)
            else:
                x = np.atleast_2d(np.asarray(x, dtype=float))
                if x.shape != (h, w):
                    raise InvalidInputError("inconsistent block widths")
                const[r0:r0 + h, c0:c0 + w] = x
            c0 += w
        r0 += h
    if ri:
        coef = sp.coo_matrix((np.concatenate(vv), (np.concatenate(ri), np.concatenate(ci))),
                             shape=(total_r * total_c, nvar))
    else:
        coef = sp.csr_matrix((total_r * total_c, nvar))
    return Affine(const, coef)


@dataclass
class Variable:
    """A declared variable: one cone block of the scalarized vector."""

    name: str
    kind: str
    shape: tuple[int, int]
    symmetric: bool
    offset: int
    dim: int

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.dim)


class Model:
    """Accumulates variables, equalities and an objective (minimization)."""

    def __init__(self):
        self.variables: list[Variable] = []
        self._exprs: dict[str, Affine] = {}
        self._cones: list[Cone] = []
        self._eq_coef: list[sp.csr_matrix] = []
        self._eq_rhs: list[np.ndarray] = []
        self._objective: Affine | None = None
        self.nvar = 0
        self.n_eq = 0

    # -- variables -----------------------------------------------------------
    def _declare(self, name, kind, shape, symmetric, dim, cone, rows, cols, vals):
        var = Variable(name or f"v{len(self.variables)}", kind, shape, symmetric, self.nvar, dim)
        self.variables.append(var)
        self._cones.append(cone)
        self.nvar += dim
        r, c = shape
        coef = sp.coo_matrix((vals, (rows, np.asarray(cols) + var.offset)),
                             shape=(r * c, self.nvar))
        expr = Affine(np.zeros(shape), coef)
        self._exprs[var.name] = expr
        return expr

    def free(self, shape, symmetric: bool = False, name: str | None = None) -> Affine:
        """Unconstrained variable; symmetric matrices store the upper triangle."""
        shape = (shape, 1) if np.isscalar(shape) else tuple(shape)
        r, c = shape
        if symmetric:
            if r != c:
                raise InvalidInputError("symmetric variables must be square")
            iu, ju = np.triu_indices(r)
            k = np.arange(iu.size)
            rows = np.concatenate([iu * c + ju, ju * c + iu])
            cols = np.concatenate([k, k])
            keep = np.ones(rows.size, bool)
            keep[iu.size:] = iu != ju
            return self._declare(name, "free", shape, True, iu.size, Cone("free", iu.size),
                                 rows[keep], cols[keep], np.ones(keep.sum()))
        k = np.arange(r * c)
        return self._declare(name, "free", shape, False, r * c, Cone("free", r * c),
                             k, k, np.ones(r * c))

    def nonneg(self, size: int, name: str | None = None) -> Affine:
        """Elementwise nonnegative column vector."""
        k = np.arange(size)
        return self._declare(name, "nonneg", (size, 1), False, size, Cone("nonneg", size),
                             k, k, np.ones(size))

    def psd(self, order: int, name: str | None = None) -> Affine:
        """Symmetric positive semidefinite matrix variable (svec-stored)."""
        iu, ju = np.triu_indices(order)
        k = np.arange(iu.size)
        vals = np.where(iu == ju, 1.0, 1.0 / SQRT2)
        rows = np.concatenate([iu * order + ju, (ju * order + iu)[iu != ju]])
        cols = np.concatenate([k, k[iu != ju]])
        vals = np.concatenate([vals, vals[iu != ju]])
        return self._declare(name, "psd", (order, order), True, svec_dim(order),
                             Cone("psd", order), rows, cols, vals)

    def var(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    # -- constraints -----------------------------------------------------------
    def _add_rows(self, coef, rhs) -> slice:
        rows = slice(self.n_eq, self.n_eq + coef.shape[0])
        self._eq_coef.append(sp.csr_matrix(coef))
        self._eq_rhs.append(np.asarray(rhs, dtype=float).ravel())
        self.n_eq += coef.shape[0]
        return rows

    def _coerce(self, expr) -> Affine:
        return expr if isinstance(expr, Affine) else Affine.constant(expr, self.nvar)

    @staticmethod
    def _svec_rows(expr: Affine):
        p = expr.shape[0]
        if expr.shape != (p, p):
            raise InvalidInputError("symmetric constraint needs a square expression")
        iu, ju = np.triu_indices(p)
        scale = np.where(iu == ju, 1.0, SQRT2)
        S = expr.sym()
        coef = sp.diags(scale) @ S.coef[iu * p + ju]
        const = S.const[iu, ju] * scale
        return coef, const

    def add_eq(self, expr, rhs=0.0, symmetric: bool = False) -> slice:
        """Impose ``expr == rhs`` (upper triangle only when ``symmetric``)."""
        diff = self._coerce(expr) - rhs
        if symmetric:
            coef, const = self._svec_rows(diff)
        else:
            coef, const = diff.coef, diff.const.ravel()
        return self._add_rows(coef, -const)

    def add_nonneg(self, expr, name: str | None = None) -> Affine:
        """Impose ``expr >= 0`` entrywise through a nonnegative slack."""
        expr = self._coerce(expr)
        slack = self.nonneg(expr.const.size, name=name)
        flat = Affine(expr.const.reshape(-1, 1), expr.coef)
        self.add_eq(flat - slack)
        return slack

    def add_psd(self, expr, name: str | None = None) -> Affine:
        """Impose ``sym(expr) >= 0`` (PSD) through a PSD slack block."""
        expr = self._coerce(expr)
        slack = self.psd(expr.shape[0], name=name)
        self.add_eq(expr - slack, symmetric=True)
        return slack

    def minimize(self, expr):
        expr = self._coerce(expr)
        if expr.shape != (1, 1):
            raise InvalidInputError("objective must be scalar")
        self._objective = expr

    def maximize(self, expr):
        self.minimize(-self._coerce(expr))

    # -- output ------------------------------------------------------------------
    def build(self) -> ConicProgram:
        n = self.nvar
        if self._eq_coef:
            A = sp.vstack([_pad(cf, n) for cf in self._eq_coef], format="csr")
            b = np.concatenate(self._eq_rhs)
        else:
            A, b = sp.csr_matrix((0, n)), np.zeros(0)
        c = np.zeros(n)
        if self._objective is not None:
            c = np.asarray(_pad(self._objective.coef, n).todense()).ravel()
        A.eliminate_zeros()
        return ConicProgram(c, A, b, tuple(self._cones))

    @property
    def objective_offset(self) -> float:
        return 0.0 if self._objective is None else float(self._objective.const[0, 0])

    def value(self, expr, x) -> np.ndarray:
        """Evaluate an expression (or variable name) at the scalarized point ``x``."""
        if isinstance(expr, str):
            expr = self._exprs[expr]
        return expr.value(x)
