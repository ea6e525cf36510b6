"""Peak and minimal singular-value gains over frequency, plus a KYP cross-check."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .statespace import StateSpace, freq_response_grid, require_valid

GRID_POINTS = 720
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
CANDIDATES = 8


@dataclass(frozen=True)
class GainResult:
    """A gain together with the frequency and unit input direction attaining it."""

    value: float
    frequency: float
    direction: np.ndarray


def frequency_grid(sys: StateSpace) -> np.ndarray:
    """Search grid: uniform on ``[0, pi]`` or ``{0} U`` log-spaced for continuous time.

    The continuous grid is scaled by the largest eigenvalue magnitude of
    ``A`` (1 if that is zero) and closed with ``inf``.
    """
    if sys.discrete:
        return np.linspace(0.0, np.pi, GRID_POINTS)
    scale = 1.0
    if sys.n:
        scale = float(np.max(np.abs(np.linalg.eigvals(sys.A)))) or 1.0
    return np.concatenate([[0.0], np.logspace(-4, 4, GRID_POINTS) * scale, [np.inf]])


def _sigma(sys: StateSpace, ws, largest: bool) -> np.ndarray:
    s = np.linalg.svd(freq_response_grid(sys, ws), compute_uv=False)
    if largest:
        return s[:, 0] if s.shape[1] else np.zeros(len(s))
    if sys.m > sys.p or s.shape[1] == 0:
        return np.zeros(len(s))
    return s[:, -1]


def _golden(f, lo: float, hi: float):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-10 * max(1.0, abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _search(sys: StateSpace, largest: bool):
    sign = 1.0 if largest else -1.0
    ws = frequency_grid(sys)
    vals = sign * _sigma(sys, ws, largest)
    last = len(ws) - 1
    # local maxima of the signed profile, best first (stable: smaller frequency wins)
    left = np.r_[-np.inf, vals[:-1]]
    right = np.r_[vals[1:], -np.inf]
    peaks = np.flatnonzero((vals >= left) & (vals >= right))
    peaks = peaks[np.argsort(-vals[peaks], kind="stable")][:CANDIDATES]

    def f(w):
        return sign * _sigma(sys, [w], largest)[0]

    cands = []
    for i in peaks:
        cands.append((vals[i], ws[i]))
        lo, hi = ws[max(i - 1, 0)], ws[min(i + 1, last)]
        if np.isinf(hi):
            hi = ws[last - 1]
        if hi > lo and np.isfinite(lo):
            x, fx = _golden(f, lo, hi)
            # converged onto a bracket end: report the grid frequency itself
            for end in (lo, hi):
                if abs(x - end) <= 1e-8 * max(1.0, abs(end)):
                    x, fx = end, f(end)
            cands.append((fx, x))
    best = max(v for v, _ in cands)
    tie = 1e-12 * max(1.0, abs(best))
    w_best = min(w for v, w in cands if v >= best - tie)
    return sign * best, w_best


def _direction(sys: StateSpace, w: float, largest: bool) -> np.ndarray:
    M = freq_response_grid(sys, [w])[0]
    _, _, vh = np.linalg.svd(M)
    v = vh[0] if largest else vh[-1]
    v = v.conj()
    # fix the phase so the largest entry is real positive
    k = int(np.argmax(np.abs(v)))
    return v * np.exp(-1j * np.angle(v[k]))


def hinf_norm(sys: StateSpace, tol: float = 1e-8) -> GainResult:
    """Peak of the largest singular value over frequency.

    Parameters
    ----------
    sys : StateSpace
        Stable system.
    tol : float
        Relative accuracy target; the refinement is tighter than the default.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    require_valid(sys)
    if sys.m == 0 or sys.p == 0:
        return GainResult(0.0, 0.0, np.zeros(sys.m, dtype=complex))
    value, w = _search(sys, largest=True)
    return GainResult(float(value), float(w), _direction(sys, w, largest=True))


def min_gain(sys: StateSpace, tol: float = 1e-8) -> GainResult:
    """Minimum over frequency of the smallest input-side singular value.

    Zero whenever there are more inputs than outputs.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    require_valid(sys)
    if sys.m == 0:
        return GainResult(0.0, 0.0, np.zeros(0, dtype=complex))
    if sys.m > sys.p:
        return GainResult(0.0, 0.0, _direction(sys, 0.0, largest=False))
    value, w = _search(sys, largest=False)
    return GainResult(float(value), float(w), _direction(sys, w, largest=False))


def _key(sys: StateSpace):
    return (sys.time_domain,) + tuple((M.shape, M.tobytes()) for M in (sys.A, sys.B, sys.C, sys.D))


@functools.lru_cache(maxsize=64)
def _kyp_level(key, tol: float) -> float:
    from .ksparse import sdp_dual

    td, *mats = key
    A, B, C, D = (np.frombuffer(buf).reshape(shape) for shape, buf in mats)
    cert = sdp_dual(StateSpace(A, B, C, D, td), max(1, B.shape[1]), pin_t=True, tol=tol)
    return cert.lam


def kyp_level(sys: StateSpace, tol: float = 1e-9) -> float:
    """Smallest ``lambda`` making the bounded-real LMI feasible (``= ||M||^2``)."""
    require_valid(sys)
    if sys.m == 0 or sys.p == 0:
        return 0.0
    return _kyp_level(_key(sys), tol)


def brl_check(sys: StateSpace, gamma: float, tol: float = 1e-9) -> bool:
    """Whether the bounded-real LMI with ``lambda = gamma**2``, ``Y = 0`` is feasible.

    The LMI is monotone in ``lambda``, so feasibility at ``gamma**2`` is
    decided against the minimal level from one SDP solve (cached per system).
    """
    if not gamma > 0:
        raise InvalidInputError("gamma must be positive")
    level = kyp_level(sys, tol)
    return gamma ** 2 >= level - 1e-7 * (1.0 + level)
