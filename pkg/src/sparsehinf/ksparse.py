"""Sparse worst-case gains: SDP relaxations, rounding, exhaustive oracle, dual bounds.

The k-sparse gain restricts the disturbance to at most ``k`` active input
channels. It is bracketed by

* a relaxation over the Gram matrix ``V = [X R; R^T W]`` of state and
  disturbance, with the cardinality constraint replaced by ``1^T |W| 1 <= k``;
* a rounding step that keeps the ``k`` largest entries of ``diag(W)`` and
  evaluates the restricted system exactly;
* an exhaustive search over all channel subsets (the reference value).

For the peak-gain problem ``rounding <= exact <= relaxation``; for the
minimal-gain problem the ordering is mirrored.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BudgetError, ConsistencyError, InvalidInputError, SolverError
from .hinf import frequency_grid, hinf_norm, min_gain
from .linalg import sym_eig
from .sdp import ConicProgram, ConicSolution, Model, solve
from .statespace import StateSpace, freq_response_grid, require_valid, restrict_channels

MODES = ("max", "min")
DEFAULT_BUDGET = 2_000_000
ORDER_TOL = 1e-6


def _check_k(sys: StateSpace, k: int) -> int:
    if isinstance(k, bool) or int(k) != k:
        raise InvalidInputError(f"k must be an integer, got {k!r}")
    k = int(k)
    if not 1 <= k <= sys.m:
        raise InvalidInputError(f"k={k} outside 1..{sys.m}")
    return k


def _check_real(sys: StateSpace):
    for name in "ABCD":
        if np.iscomplexobj(getattr(sys, name)):
            raise InvalidInputError("only real system data is supported")


def _check_mode(mode: str):
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")


def output_gram(sys: StateSpace) -> np.ndarray:
    """``[C D]^T [C D]``, the objective weight on ``V``."""
    CD = np.hstack([sys.C, sys.D])
    return CD.T @ CD


# -- program builders -----------------------------------------------------------
def _l1_constraints(model: Model, W, k: int):
    m = W.shape[0]
    iu, ju = np.triu_indices(m)
    S = model.nonneg(iu.size, name="S")
    Wu = W[iu, ju].T
    model.add_nonneg(S - Wu)
    model.add_nonneg(S + Wu)
    weights = np.where(iu == ju, 1.0, 2.0).reshape(1, -1)
    model.add_nonneg(float(k) - weights @ S)


def _stationarity(model: Model, sys: StateSpace, V):
    n = sys.n
    if n == 0:
        return
    AB = np.hstack([sys.A, sys.B])
    if sys.discrete:
        expr = V[:n, :n] - AB @ V @ AB.T
    else:
        E0 = np.eye(n, n + sys.m)
        expr = AB @ V @ E0.T + E0 @ V @ AB.T
    model.add_eq(expr, symmetric=True)


def _relaxation_model(sys: StateSpace, k: int, mode: str, privacy=None) -> Model:
    require_valid(sys)
    _check_real(sys)
    k = _check_k(sys, k)
    n, m = sys.n, sys.m
    model = Model()
    V = model.psd(n + m, name="V")
    W = V[n:, n:]
    _stationarity(model, sys, V)
    if mode == "max":
        model.add_nonneg(1.0 - W.trace())
    else:
        model.add_nonneg(W.trace() - 1.0)
    _l1_constraints(model, W, k)
    if privacy is not None:
        G, H, gamma = privacy
        G = np.atleast_2d(np.asarray(G, dtype=float))
        H = np.atleast_2d(np.asarray(H, dtype=float))
        if G.shape[1] != n or H.shape[1] != m or G.shape[0] != H.shape[0]:
            raise InvalidInputError("privacy maps G, H have inconsistent shapes")
        if not gamma > 0:
            raise InvalidInputError("privacy level gamma must be positive")
        GH = np.hstack([G, H])
        model.add_nonneg((GH.T @ GH @ V).trace() - float(gamma) ** 2)
    objective = (output_gram(sys) @ V).trace()
    if mode == "max":
        model.maximize(objective)
    else:
        model.minimize(objective)
    return model


def build_upper_sdp(sys: StateSpace, k: int) -> ConicProgram:
    """Relaxation of the k-sparse peak gain (stated as a minimization of ``-trace``)."""
    return _relaxation_model(sys, k, "max").build()


def build_lower_sdp(sys: StateSpace, k: int, privacy=None) -> ConicProgram:
    """Relaxation of the k-sparse minimal gain.

    ``privacy = (G, H, gamma)`` adds ``trace([G H]^T [G H] V) >= gamma**2``.
    """
    return _relaxation_model(sys, k, "min", privacy).build()


def _dual_model(sys: StateSpace, k: int, pin_t: bool) -> Model:
    require_valid(sys)
    _check_real(sys)
    k = _check_k(sys, k)
    n, m = sys.n, sys.m
    model = Model()
    lam = model.nonneg(1, name="lam")
    Em = np.vstack([np.zeros((n, m)), np.eye(m)])
    T = lam.times(np.eye(m))
    if not pin_t:
        t = model.nonneg(1, name="t")
        Y = model.free((m, m), symmetric=True, name="Y")
        T = T + Y
        iu, ju = np.triu_indices(m)
        tcol = np.ones((iu.size, 1)) @ t
        Yu = Y[iu, ju].T
        model.add_nonneg(tcol - Yu)
        model.add_nonneg(tcol + Yu)
    L = output_gram(sys) - Em @ T @ Em.T
    if n:
        P = model.free((n, n), symmetric=True, name="P")
        AB = np.hstack([sys.A, sys.B])
        E0 = np.eye(n, n + m)
        if sys.discrete:
            L = L + AB.T @ P @ AB - E0.T @ P @ E0
        else:
            L = L + AB.T @ P @ E0 + E0.T @ P @ AB
    model.add_psd(-L, name="Z")
    model.minimize(lam if pin_t else lam + float(k) * t)
    return model


def build_dual_sdp(sys: StateSpace, k: int, pin_t: bool = False) -> ConicProgram:
    """Dual bound: minimize ``lambda + k t`` over the bounded-real LMI with ``|Y| <= t``.

    With ``pin_t`` the variables ``t`` and ``Y`` are dropped, which leaves
    the plain bounded-real program whose optimum is the squared peak gain.
    """
    return _dual_model(sys, k, pin_t).build()


# -- results ------------------------------------------------------------------------
@dataclass
class RelaxationResult:
    """Solved relaxation. ``value`` is the square root of ``objective``."""

    value: float
    X: np.ndarray
    R: np.ndarray
    W: np.ndarray
    status: str
    objective: float
    k: int
    mode: str
    iterations: int = 0
    program: ConicProgram | None = field(default=None, repr=False)
    solution: ConicSolution | None = field(default=None, repr=False)

    @property
    def V(self) -> np.ndarray:
        return np.block([[self.X, self.R], [self.R.T, self.W]])


@dataclass
class DualCertificate:
    """Feasible point of the dual program; proves a bound ``sqrt(value)``."""

    P: np.ndarray
    Y: np.ndarray
    lam: float
    t: float
    value: float
    k: int
    status: str = "optimal"
    program: ConicProgram | None = field(default=None, repr=False)
    solution: ConicSolution | None = field(default=None, repr=False)

    @property
    def bound(self) -> float:
        return math.sqrt(max(self.value, 0.0))


@dataclass
class SandwichResult:
    """Rounding value, relaxation value and (optionally) the exhaustive optimum.

    ``lower`` is always the rounding value and ``upper`` the relaxation value.
    For ``mode="max"`` they bracket ``exact`` as ``lower <= exact <= upper``;
    for ``mode="min"`` the bracket is ``upper <= exact <= lower``.
    """

    lower: float
    upper: float
    channels_round: tuple[int, ...]
    k: int
    mode: str = "max"
    exact: float | None = None
    channels_exact: tuple[int, ...] | None = None
    relaxation: RelaxationResult | None = field(default=None, repr=False)

    @property
    def rounding(self) -> float:
        return self.lower

    @property
    def relaxed(self) -> float:
        return self.upper

    def to_dict(self, duality_gap: float | None = None) -> dict:
        return {
            "k": self.k,
            "mode": self.mode,
            "lower": self.lower,
            "exact": self.exact,
            "upper": self.upper,
            "channels_round": list(self.channels_round),
            "channels_exact": None if self.channels_exact is None else list(self.channels_exact),
            "duality_gap": duality_gap,
            "solver_iters": None if self.relaxation is None else self.relaxation.iterations,
        }


def save_result(result: SandwichResult, path, duality_gap: float | None = None) -> None:
    Path(path).write_text(json.dumps(result.to_dict(duality_gap), indent=2))


def load_result(path) -> dict:
    data = json.loads(Path(path).read_text())
    expected = {"k", "mode", "lower", "exact", "upper", "channels_round", "channels_exact",
                "duality_gap", "solver_iters"}
    if set(data) != expected:
        raise InvalidInputError(f"result file fields {sorted(data)} differ from {sorted(expected)}")
    return data


# -- solvers ------------------------------------------------------------------------
def _solve(prog: ConicProgram, tol: float, what: str) -> ConicSolution:
    sol = solve(prog, tol=tol)
    if sol.status != "optimal":
        raise SolverError(f"{what} ended with status {sol.status}", sol.status, sol)
    return sol


def _normalize(sys: StateSpace):
    """Rescale outputs by the peak gain and states by the peak state response.

    Returns ``(scaled, gain, beta)`` with ``scaled = (A, B/beta, C beta/gain,
    D/gain)``. Relaxation blocks map back as ``X = beta^2 X'``, ``R = beta R'``,
    ``W = W'`` and objectives as ``gain^2``; dual variables as ``P = gain^2 /
    beta^2 P'`` and ``(lam, t, Y) = gain^2 (lam', t', Y')``. Keeping both
    scales near one avoids cancellation in the equality residuals.
    """
    require_valid(sys)
    gain = hinf_norm(sys).value if sys.m and sys.p else 0.0
    gain = gain if gain > 1e-150 else 1.0
    beta = 1.0
    if sys.n and sys.m:
        probe = StateSpace(sys.A, sys.B, np.eye(sys.n), np.zeros((sys.n, sys.m)), sys.time_domain)
        beta = hinf_norm(probe).value
        beta = beta if beta > 1e-150 else 1.0
    scaled = StateSpace(sys.A, sys.B / beta, sys.C * (beta / gain), sys.D / gain, sys.time_domain)
    return scaled, gain, beta


def _relaxation(sys, k, mode, privacy, tol) -> RelaxationResult:
    scaled, gain, beta = _normalize(sys)
    if privacy is not None:
        G, H, gamma = privacy
        privacy = (np.asarray(G, dtype=float) * (beta / gain),
                   np.asarray(H, dtype=float) / gain, gamma / gain)
    model = _relaxation_model(scaled, k, mode, privacy)
    prog = model.build()
    sol = _solve(prog, tol, f"{mode} relaxation")
    n = sys.n
    V = model.value("V", sol.x)
    V = 0.5 * (V + V.T)
    X, R, W = V[:n, :n] * beta ** 2, V[:n, n:] * beta, V[n:, n:]
    obj = float(np.trace(output_gram(scaled) @ V)) * gain ** 2
    return RelaxationResult(
        value=math.sqrt(max(obj, 0.0)), X=X, R=R, W=W,
        status=sol.status, objective=obj, k=int(k), mode=mode,
        iterations=sol.iterations, program=prog, solution=sol)


def sdp_upper(sys: StateSpace, k: int, tol: float = 1e-8) -> RelaxationResult:
    """Relaxation bound on the k-sparse peak gain.

    The program is solved for a rescaled realization (see ``_normalize``);
    ``program`` and ``solution`` on the result refer to that scaled program.
    """
    return _relaxation(sys, k, "max", None, tol)


def sdp_lower(sys: StateSpace, k: int, privacy=None, tol: float = 1e-8) -> RelaxationResult:
    """Relaxation bound on the k-sparse minimal gain (a lower bound)."""
    return _relaxation(sys, k, "min", privacy, tol)


def sdp_dual(sys: StateSpace, k: int, pin_t: bool = False, tol: float = 1e-8) -> DualCertificate:
    """Solve the dual program and return its certificate (in original coordinates)."""
    scaled, gain, beta = _normalize(sys)
    model = _dual_model(scaled, k, pin_t)
    prog = model.build()
    sol = _solve(prog, tol, "dual program")
    n, m = sys.n, sys.m
    g2 = gain ** 2
    lam = float(model.value("lam", sol.x)[0, 0]) * g2
    if pin_t:
        t, Y = 0.0, np.zeros((m, m))
    else:
        t = float(model.value("t", sol.x)[0, 0]) * g2
        Y = model.value("Y", sol.x) * g2
    P = model.value("P", sol.x) * (g2 / beta ** 2) if n else np.zeros((0, 0))
    return DualCertificate(P=P, Y=Y, lam=lam, t=t, value=lam + int(k) * t, k=int(k),
                           status=sol.status, program=prog, solution=sol)


def dual_lmi(sys: StateSpace, cert: DualCertificate) -> np.ndarray:
    """The block matrix that a dual certificate must keep negative semidefinite."""
    n, m = sys.n, sys.m
    AB = np.hstack([sys.A, sys.B])
    E0 = np.eye(n, n + m)
    Em = np.vstack([np.zeros((n, m)), np.eye(m)])
    L = output_gram(sys) - Em @ (cert.lam * np.eye(m) + cert.Y) @ Em.T
    if n:
        if sys.discrete:
            L += AB.T @ cert.P @ AB - E0.T @ cert.P @ E0
        else:
            L += AB.T @ cert.P @ E0 + E0.T @ cert.P @ AB
    return 0.5 * (L + L.T)


def certificate_violation(sys: StateSpace, cert: DualCertificate) -> dict:
    """Largest LMI eigenvalue and largest excess of ``|Y|`` over ``t``."""
    w, _ = sym_eig(dual_lmi(sys, cert))
    excess = float(np.max(np.abs(cert.Y)) - cert.t) if cert.Y.size else -cert.t
    return {"lmi_max_eig": float(w[-1]), "y_excess": excess,
            "lam": cert.lam, "t": cert.t}


def duality_gap(sys: StateSpace, k: int, tol: float = 1e-8) -> float:
    """``|primal - dual| / (1 + |primal|)`` on squared values."""
    primal = sdp_upper(sys, k, tol).objective
    dual = sdp_dual(sys, k, tol=tol).value
    return abs(primal - dual) / (1.0 + abs(primal))


def l1_bound_check(W, k) -> bool:
    """``1^T |W| 1 <= k`` up to 1e-9."""
    return float(np.abs(np.asarray(W, dtype=float)).sum()) <= k + 1e-9


# -- rounding and the exhaustive oracle --------------------------------------------------
def _restricted_gain(sys: StateSpace, channels, mode: str) -> float:
    sub = restrict_channels(sys, channels)
    return (hinf_norm(sub) if mode == "max" else min_gain(sub)).value


def round_channels(sys: StateSpace, k: int, W, mode: str = "max"):
    """Keep the ``k`` largest entries of ``diag(W)`` (ties to the lower index).

    Returns the sorted channel tuple and the exact gain of the restricted system.
    """
    _check_mode(mode)
    k = _check_k(sys, k)
    d = np.diag(np.asarray(W, dtype=float))
    if d.size != sys.m:
        raise InvalidInputError(f"W has order {d.size}, system has {sys.m} inputs")
    order = np.argsort(-d, kind="stable")
    channels = tuple(sorted(int(i) for i in order[:k]))
    return channels, _restricted_gain(sys, channels, mode)


def _subset_grid_values(G, diag, subsets, mode, chunk):
    """Grid-level squared gains for each subset, processed in chunks."""
    out = np.empty(len(subsets))
    for start in range(0, len(subsets), chunk):
        S = subsets[start:start + chunk]
        sub = G[:, S[:, :, None], S[:, None, :]]
        ev = np.linalg.eigvalsh(sub)
        out[start:start + chunk] = ev[..., -1].max(0) if mode == "max" else ev[..., 0].min(0)
    return out


def exact_exhaustive(sys: StateSpace, k: int, mode: str = "max",
                     budget: int = DEFAULT_BUDGET, slack: float = 0.1):
    """Best k-subset of input channels by exhaustive search.

    Every subset is scored on the frequency grid of :func:`hinf_norm` (via
    the Gram matrices ``M^H M``). Subsets are then refined exactly in order
    of their grid score until the score, widened by ``slack``, can no
    longer beat the best refined value. In ``max`` mode a trace bound skips
    subsets that cannot reach the best grid score.

    Returns
    -------
    channels : tuple of int
        Lexicographically smallest optimal subset.
    value : float
    """
    _check_mode(mode)
    require_valid(sys)
    k = _check_k(sys, k)
    m = sys.m
    count = math.comb(m, k)
    if count > budget:
        raise BudgetError(f"{count} subsets exceed the budget of {budget}")
    if k == m:
        full = tuple(range(m))
        return full, _restricted_gain(sys, full, mode)

    ws = frequency_grid(sys)
    F = freq_response_grid(sys, ws)
    G = np.conj(np.swapaxes(F, 1, 2)) @ F
    diag = np.real(np.einsum("wii->wi", G))
    subsets = np.array(list(itertools.combinations(range(m), k)), dtype=np.intp)
    chunk = max(1, 2_000_000 // (len(ws) * k * k))

    if mode == "max":
        ub = np.empty(len(subsets))
        for start in range(0, len(subsets), 8 * chunk):
            S = subsets[start:start + 8 * chunk]
            ub[start:start + 8 * chunk] = diag[:, S].sum(-1).max(0)
        order = np.argsort(-ub, kind="stable")
        scores = np.full(len(subsets), -np.inf)
        best = -np.inf
        for start in range(0, len(order), chunk):
            idx = order[start:start + chunk]
            if ub[idx[0]] < (1.0 - slack) * best:
                break
            scores[idx] = _subset_grid_values(G, diag, subsets[idx], mode, chunk)
            best = max(best, scores[idx].max())
        ranked = np.argsort(-scores, kind="stable")
    else:
        scores = _subset_grid_values(G, diag, subsets, mode, chunk)
        ranked = np.argsort(scores, kind="stable")

    best_val, best_set = None, None
    for i in ranked:
        grid = math.sqrt(max(scores[i], 0.0))
        if best_val is not None:
            if mode == "max" and (not np.isfinite(scores[i]) or grid * (1.0 + slack) < best_val):
                break
            if mode == "min" and grid * (1.0 - slack) > best_val:
                break
        S = tuple(int(j) for j in subsets[i])
        val = _restricted_gain(sys, S, mode)
        if best_val is None:
            best_val, best_set = val, S
            continue
        tie = 1e-9 * max(1.0, abs(best_val))
        better = val > best_val + tie if mode == "max" else val < best_val - tie
        if better or (abs(val - best_val) <= tie and S < best_set):
            best_val, best_set = val, S
    return best_set, float(best_val)


def sandwich(sys: StateSpace, k: int, mode: str = "max", with_exact: bool = False,
             budget: int = DEFAULT_BUDGET, tol: float = 1e-8) -> SandwichResult:
    """Relaxation, rounding and optionally the exhaustive value, with ordering checks.

    Raises
    ------
    ConsistencyError
        If the three values violate the expected ordering by more than
        ``1e-6 (1 + relaxation value)``.
    """
    _check_mode(mode)
    rel = sdp_upper(sys, k, tol) if mode == "max" else sdp_lower(sys, k, tol=tol)
    channels, rounded = round_channels(sys, k, rel.W, mode)
    res = SandwichResult(lower=rounded, upper=rel.value, channels_round=channels,
                         k=int(k), mode=mode, relaxation=rel)
    if with_exact:
        res.channels_exact, res.exact = exact_exhaustive(sys, k, mode, budget)
    check_ordering(res)
    return res


def check_ordering(res: SandwichResult, rel_tol: float = ORDER_TOL) -> None:
    """Raise :class:`ConsistencyError` unless the bracket holds within tolerance."""
    slack = rel_tol * (1.0 + abs(res.upper))
    chain = [res.lower] + ([res.exact] if res.exact is not None else []) + [res.upper]
    if res.mode == "min":
        chain = chain[::-1]
    for a, b in zip(chain, chain[1:]):
        if a > b + slack:
            raise ConsistencyError(
                f"ordering violated for k={res.k} ({res.mode}): "
                f"lower={res.lower!r} exact={res.exact!r} upper={res.upper!r}")
