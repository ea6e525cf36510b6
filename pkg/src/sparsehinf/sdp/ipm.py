"""Primal-dual interior-point method for :class:`ConicProgram`.

The solver works on the homogeneous self-dual embedding::

    A x - b tau          = 0
    A.T y + s - c tau    = 0
    c @ x - b @ y + kappa = 0,     x in K, s in K*, tau, kappa >= 0

so that optimality and infeasibility are detected by the same iteration.
Search directions use Nesterov-Todd scaling and Mehrotra's
predictor-corrector; the normal equations (augmented with the free
variables) are solved densely.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg
import scipy.linalg.blas
import scipy.sparse

from ..errors import InvalidInputError
from .cones import identity_point, smat, svec, triu_indices
from .program import ConicProgram, ConicSolution, residual_report

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
STEP_FRACTION = 0.99


class _Breakdown(Exception):
    pass


class _Block:
    """Per-cone bookkeeping: column slice, NT scaling, scaled variables."""

    def __init__(self, cone, sl, A):
        self.kind = cone.kind
        self.p = cone.size
        self.sl = sl
        self.rows = np.zeros(0, dtype=int)
        if self.kind == "nonneg" and A.shape[0]:
            sub = A[:, sl]
            self.rows = np.flatnonzero(np.any(sub != 0, axis=1))
            self.Asub = scipy.sparse.csr_matrix(sub[self.rows])
        if self.kind == "psd" and A.shape[0]:
            sub = A[:, sl]
            counts = np.count_nonzero(sub, axis=1)
            # rows with a single svec entry get a closed-form Schur update
            self.dense = np.flatnonzero(counts > 1)
            self.single = np.flatnonzero(counts == 1)
            self.rows = np.concatenate([self.dense, self.single])
            self.F = smat(sub[self.dense])  # (r, p, p)
            col = np.argmax(sub[self.single] != 0, axis=1)
            iu, ju = triu_indices(self.p)
            self.sa, self.sb = iu[col], ju[col]
            vals = sub[self.single, col]
            # F_j = f_j (e_a e_b^T + e_b e_a^T) / (1 + [a == b])
            self.sf = np.where(self.sa == self.sb, vals, vals / np.sqrt(2.0))

    # -- scaling -----------------------------------------------------------
    def scale(self, x, s):
        if self.kind == "nonneg":
            self.d = np.sqrt(x / s)
            self.lam = np.sqrt(x * s)
            return
        X, S = smat(x), smat(s)
        try:
            Lx = np.linalg.cholesky(X)
            Ls = np.linalg.cholesky(S)
        except np.linalg.LinAlgError as exc:
            raise _Breakdown("iterate left the PSD cone") from exc
        U, sig, Vt = np.linalg.svd(Ls.T @ Lx)
        if sig[-1] <= 0:
            raise _Breakdown("degenerate NT scaling")
        self.R = Lx @ Vt.T / np.sqrt(sig)
        self.Rinv = np.linalg.inv(self.R)
        self.W = self.R @ self.R.T
        self.lam = sig

    def H(self, v):
        """Apply the scaling operator mapping dual directions to primal ones."""
        if self.kind == "nonneg":
            return self.d ** 2 * v
        return svec(self.W @ smat(v) @ self.W)

    def from_scaled(self, u):
        """Primal-space image of a scaled direction: ``R u R.T``."""
        if self.kind == "nonneg":
            return self.d * u
        return svec(self.R @ smat(u) @ self.R.T)

    def primal_to_scaled(self, dx):
        if self.kind == "nonneg":
            return dx / self.d
        return svec(self.Rinv @ smat(dx) @ self.Rinv.T)

    def dual_to_scaled(self, ds):
        if self.kind == "nonneg":
            return self.d * ds
        return svec(self.R.T @ smat(ds) @ self.R)

    # -- Jordan algebra at the scaled point lam ------------------------------
    def lam_sq(self):
        if self.kind == "nonneg":
            return self.lam ** 2
        return svec(np.diag(self.lam ** 2))

    def e(self):
        if self.kind == "nonneg":
            return np.ones(self.p)
        return svec(np.eye(self.p))

    def jordan(self, u, v):
        if self.kind == "nonneg":
            return u * v
        U, V = smat(u), smat(v)
        return svec(0.5 * (U @ V + V @ U))

    def lam_solve(self, t):
        """Solve ``lam o u = t`` for ``u``."""
        if self.kind == "nonneg":
            return t / self.lam
        denom = 0.5 * (self.lam[:, None] + self.lam[None, :])
        return svec(smat(t) / denom)

    def max_step(self, u):
        """Largest ``alpha`` with ``lam + alpha * u`` in the cone."""
        if self.kind == "nonneg":
            neg = u < 0
            if not np.any(neg):
                return np.inf
            return float(np.min(-self.lam[neg] / u[neg]))
        isq = 1.0 / np.sqrt(self.lam)
        Z = smat(u) * isq[:, None] * isq[None, :]
        wmin = np.linalg.eigvalsh(Z)[0]
        return np.inf if wmin >= 0 else float(-1.0 / wmin)

    def add_schur(self, M, A):
        if self.rows.size == 0:
            return
        if self.kind == "nonneg":
            Ad = self.Asub @ scipy.sparse.diags(self.d ** 2)
            M[np.ix_(self.rows, self.rows)] += (Ad @ self.Asub.T).toarray()
            return
        d, sg = self.dense, self.single
        if d.size:
            # with W = R R^T: <F_i, W F_j W> = <svec(R^T F_i R), svec(R^T F_j R)>
            Gh = np.matmul(self.R.T, np.matmul(self.F, self.R))
            upper = scipy.linalg.blas.dsyrk(1.0, svec(Gh))
            M[np.ix_(d, d)] += np.triu(upper) + np.triu(upper, 1).T
        if sg.size:
            W, a, b, f = self.W, self.sa, self.sb, self.sf
            mult = f * np.where(a == b, 1.0, 2.0)
            if d.size:
                WFW = np.matmul(self.R, np.matmul(Gh, self.R.T))
                cross = WFW[:, a, b] * mult
                M[np.ix_(d, sg)] += cross
                M[np.ix_(sg, d)] += cross.T
            half = f / np.where(a == b, 2.0, 1.0)
            ss = (W[np.ix_(a, a)] * W[np.ix_(b, b)] + W[np.ix_(a, b)] * W[np.ix_(b, a)])
            M[np.ix_(sg, sg)] += 2.0 * ss * np.outer(half, half)


def _presolve(A, b, A_sparse=None):
    """Drop linearly dependent equality rows.

    Returns the kept row indices, or a Farkas vector ``y`` (with
    ``A.T y = 0`` and ``b @ y > 0``) when the equalities are inconsistent.
    """
    m = A.shape[0]
    if m == 0:
        return np.arange(0), None
    if A_sparse is not None:
        # cheap path: a well-conditioned Gram matrix means full row rank
        gram = (A_sparse @ A_sparse.T).toarray()
        d = np.diag(gram)
        if np.all(d > 0):
            scaled = gram / np.sqrt(np.outer(d, d))
            try:
                L = np.linalg.cholesky(scaled)
                if np.min(np.diag(L)) ** 2 > 1e-10:
                    return np.arange(m), None
            except np.linalg.LinAlgError:
                pass
    _, R, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        rank = 0
    else:
        rank = int(np.sum(diag > 1e-12 * diag[0] * max(A.shape)))
    if rank == m:
        return np.arange(m), None
    keep = np.sort(piv[:rank])
    # component of b outside the range of A
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    r = b - A @ sol
    if np.linalg.norm(r) > 1e-9 * (1.0 + np.linalg.norm(b)):
        return keep, r
    return keep, None


def solve(prog: ConicProgram, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
          step: float = STEP_FRACTION, keep_trace: bool = True) -> ConicSolution:
    """Solve a conic program with a homogeneous primal-dual interior-point method.

    Parameters
    ----------
    prog : ConicProgram
        The program to solve.
    tol : float
        Relative tolerance on the primal residual, dual residual and duality
        gap; also the threshold for infeasibility certificates.
    max_iter : int
        Iteration limit.
    step : float
        Fraction of the distance to the cone boundary taken at each step.
    keep_trace : bool
        Record per-iteration objective values and residuals.

    Returns
    -------
    ConicSolution
        ``status`` is one of ``optimal``, ``primal_infeasible``,
        ``dual_infeasible``, ``max_iter`` or ``numerical_failure``.
    """
    if tol <= 0 or max_iter < 1:
        raise InvalidInputError("tol must be positive and max_iter at least 1")
    sol = _run(prog, tol, max_iter, step, keep_trace, row_shift=False)
    if sol.status == "numerical_failure":
        # a global diagonal shift damps badly conditioned systems but can swamp
        # rows that shrink near the boundary; retry with per-row shifts
        retry = _run(prog, tol, max_iter, step, keep_trace, row_shift=True)
        if retry.status != "numerical_failure":
            return retry
    return sol


def _run(prog, tol, max_iter, step, keep_trace, row_shift):
    A_full = prog.A.toarray()
    b_full = prog.b
    c = prog.c
    keep, farkas = _presolve(A_full, b_full, prog.A)
    if farkas is not None:
        y = farkas / np.linalg.norm(farkas)
        s = -(A_full.T @ y)
        res = residual_report(prog, np.zeros(prog.dim), y, s)
        return ConicSolution("primal_infeasible", np.zeros(prog.dim), y, s,
                             np.nan, np.nan, res.as_dict(), 0, [])
    A = A_full[keep]
    b = b_full[keep]
    m = A.shape[0]

    slices = prog.block_slices()
    blocks = []
    free_idx, cone_idx = [], []
    for cone, sl in zip(prog.cones, slices):
        idx = np.arange(sl.start, sl.stop)
        if cone.kind == "free":
            free_idx.append(idx)
        else:
            cone_idx.append(idx)
            if cone.dim:
                blocks.append(_Block(cone, sl, A))
    free_idx = np.concatenate(free_idx) if free_idx else np.zeros(0, dtype=int)
    cone_idx = np.concatenate(cone_idx) if cone_idx else np.zeros(0, dtype=int)
    nu = sum(cone.degree for cone in prog.cones)
    Af = A[:, free_idx]
    nf = free_idx.size
    A = scipy.sparse.csr_matrix(A)  # blocks hold their own dense slices

    x = identity_point(prog.cones)
    s = identity_point(prog.cones)
    y = np.zeros(m)
    tau = kappa = 1.0
    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.linalg.norm(c)

    trace = []
    status = "max_iter"
    it = 0

    def apply_H(v):
        out = np.zeros_like(v)
        for blk in blocks:
            out[blk.sl] = blk.H(v[blk.sl])
        return out

    for it in range(max_iter + 1):
        R1 = A @ x - b * tau
        R2 = A.T @ y + s - c * tau
        R3 = c @ x - b @ y + kappa
        xs = float(x[cone_idx] @ s[cone_idx])
        mu = (xs + tau * kappa) / (nu + 1)

        pres = np.linalg.norm(R1) / tau / bnorm
        dres = np.linalg.norm(R2) / tau / cnorm
        pobj = c @ x / tau
        dobj = b @ y / tau
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        if keep_trace:
            trace.append({"iter": it, "pobj": pobj, "dobj": dobj, "pres": pres,
                          "dres": dres, "gap": gap, "tau": tau, "kappa": kappa,
                          "mu": mu, "xs": xs / tau ** 2})
        log.debug("it %3d pobj %+.8e dobj %+.8e pres %.1e dres %.1e gap %.1e",
                  it, pobj, dobj, pres, dres, gap)
        if pres <= tol and dres <= tol and gap <= tol:
            status = "optimal"
            break
        by = b @ y
        if by > 0:
            pinf = np.linalg.norm(A.T @ y + s) / max(1.0, np.linalg.norm(c)) / by
            if pinf <= tol:
                status = "primal_infeasible"
                break
        cx = c @ x
        if cx < 0:
            dinf = np.linalg.norm(A @ x) / max(1.0, np.linalg.norm(b)) / (-cx)
            if dinf <= tol:
                status = "dual_infeasible"
                break
        if it == max_iter:
            break

        try:
            for blk in blocks:
                blk.scale(x[blk.sl], s[blk.sl])
            K, factor = _factor_kkt(A, Af, blocks, m, nf, row_shift)
        except _Breakdown as exc:
            log.debug("breakdown: %s", exc)
            status = "numerical_failure"
            break

        Hc = apply_H(c)
        q = np.concatenate([A @ Hc + b, c[free_idx]])
        v = _kkt_solve(K, factor, q)

        cfree = c[free_idx]

        def newton(p1, p2, p3, targets, pk):
            """Solve the linearized embedding for right-hand sides ``p*``."""
            rhs_c = np.zeros(prog.dim)
            for blk, u in zip(blocks, targets):
                rhs_c[blk.sl] = blk.from_scaled(u)
            hp2 = apply_H(p2)
            rhs = np.concatenate([p1 - A @ rhs_c + A @ hp2, p2[free_idx]])
            u = _kkt_solve(K, factor, rhs)
            uy, uf = u[:m], u[m:]
            vy, vf = v[:m], v[m:]
            a0 = rhs_c - hp2 + apply_H(A.T @ uy)
            a1 = apply_H(A.T @ vy) - Hc
            num = p3 - pk / tau - c @ a0 - cfree @ uf + b @ uy
            den = c @ a1 + cfree @ vf - b @ vy - kappa / tau
            dtau = num / den
            dy = uy + vy * dtau
            dx = a0 + a1 * dtau
            dx[free_idx] = uf + vf * dtau
            ds = p2 - A.T @ dy + c * dtau
            ds[free_idx] = 0.0
            dkappa = (pk - kappa * dtau) / tau
            return dx, dy, ds, dtau, dkappa

        def direction(eta, targets, tk_target, refine=2):
            p1, p2, p3 = -eta * R1, -eta * R2, -eta * R3
            dx, dy, ds, dtau, dkappa = newton(p1, p2, p3, targets, tk_target)
            for _ in range(refine):
                r1 = p1 - (A @ dx - b * dtau)
                r2 = p2 - (A.T @ dy + ds - c * dtau)
                r3 = p3 - (c @ dx - b @ dy + dkappa)
                ru = [u_t - blk.primal_to_scaled(dx[blk.sl]) - blk.dual_to_scaled(ds[blk.sl])
                      for blk, u_t in zip(blocks, targets)]
                rk = tk_target - (kappa * dtau + tau * dkappa)
                ex, ey, es, et, ek = newton(r1, r2, r3, ru, rk)
                dx, dy, ds, dtau, dkappa = dx + ex, dy + ey, ds + es, dtau + et, dkappa + ek
            scaled = [(blk.primal_to_scaled(dx[blk.sl]), blk.dual_to_scaled(ds[blk.sl]))
                      for blk in blocks]
            return dx, dy, ds, dtau, dkappa, scaled

        def max_alpha(scaled, dtau, dkappa):
            alpha = np.inf
            for blk, (dxt, dst) in zip(blocks, scaled):
                alpha = min(alpha, blk.max_step(dxt), blk.max_step(dst))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        # predictor
        aff_targets = [-blk.lam if blk.kind == "nonneg" else -svec(np.diag(blk.lam))
                       for blk in blocks]
        d_aff = direction(1.0, aff_targets, -tau * kappa)
        alpha_aff = min(1.0, max_alpha(d_aff[5], d_aff[3], d_aff[4]))
        sigma = (1.0 - alpha_aff) ** 3

        # corrector
        targets = []
        for blk, (dxt, dst) in zip(blocks, d_aff[5]):
            t = sigma * mu * blk.e() - blk.lam_sq() - blk.jordan(dxt, dst)
            targets.append(blk.lam_solve(t))
        tk = sigma * mu - tau * kappa - d_aff[3] * d_aff[4]
        dx, dy, ds, dtau, dkappa, scaled = direction(1.0 - sigma, targets, tk)
        alpha = min(1.0, step * max_alpha(scaled, dtau, dkappa))
        if not np.isfinite(alpha) or alpha < 1e-12:
            status = "numerical_failure"
            break

        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    y_full = np.zeros(prog.n_eq)
    if status in ("primal_infeasible",):
        y_full[keep] = y
        xr, sr = x, s
        res = residual_report(prog, np.zeros(prog.dim), y_full, sr)
        pobj = dobj = np.nan
    elif status == "dual_infeasible":
        xr, sr = x, s
        res = residual_report(prog, xr, y_full, np.zeros(prog.dim))
        pobj = dobj = np.nan
    else:
        xr, sr = x / tau, s / tau
        y_full[keep] = y / tau
        res = residual_report(prog, xr, y_full, sr)
        pobj, dobj = float(c @ xr), float(b_full @ y_full)
    return ConicSolution(status, xr, y_full, sr, pobj, dobj, res.as_dict(), it, trace)


def _factor_kkt(A, Af, blocks, m, nf, row_shift=False):
    M = np.zeros((m, m))
    for blk in blocks:
        blk.add_schur(M, A)
    d = np.abs(np.diag(M))
    scale = max(1.0, float(d.max())) if m else 1.0
    if row_shift:
        # shift each row relative to its own diagonal, so rows whose variables
        # all approach the cone boundary are not swamped
        reg = 1e-14 * np.where(d > 0, d, 1.0)
    else:
        reg = np.full(m, 1e-14 * scale)
    if nf == 0:
        K = M
        Kreg = M + np.diag(reg)
        try:
            return K, ("chol", scipy.linalg.cho_factor(Kreg, check_finite=False))
        except np.linalg.LinAlgError:
            pass
    else:
        K = np.block([[M, Af], [Af.T, np.zeros((nf, nf))]])
        Kreg = K + np.diag(np.concatenate([reg, np.full(nf, -1e-14 * scale)]))
    if not np.all(np.isfinite(Kreg)):
        raise _Breakdown("non-finite KKT matrix")
    lu = scipy.linalg.lu_factor(Kreg, check_finite=False)
    return K, ("lu", lu)


def _kkt_solve(K, factor, rhs, refine: int = 2):
    kind, f = factor
    solve_ = (lambda r: scipy.linalg.cho_solve(f, r, check_finite=False)) if kind == "chol" \
        else (lambda r: scipy.linalg.lu_solve(f, r, check_finite=False))
    sol = solve_(rhs)
    for _ in range(refine):
        r = rhs - K @ sol
        sol = sol + solve_(r)
    return sol
