"""LTI state-space systems: validation, channel restriction, frequency response.

Channel and state indices are 0-based throughout the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, SingularMatrixError, StabilityError
from .linalg import complex_solve

TIME_DOMAINS = ("discrete", "continuous")


def _mat(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(1, -1) if M.size else M.reshape(0, 0)
    if M.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got {M.ndim}-d data")
    M = M.copy()
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class StateSpace:
    """``M(z) = C (zI - A)^{-1} B + D``.

    Shapes are not checked on construction; call :func:`validate` (the
    analysis functions do so themselves).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    time_domain: str = "discrete"

    def __post_init__(self):
        for name in "ABCD":
            object.__setattr__(self, name, _mat(getattr(self, name)))
        if self.time_domain not in TIME_DOMAINS:
            raise InvalidInputError(f"time_domain must be one of {TIME_DOMAINS}")

    @classmethod
    def static(cls, D, time_domain: str = "discrete") -> "StateSpace":
        """Memoryless system ``M(z) = D`` (zero states)."""
        D = _mat(D)
        p, m = D.shape
        return cls(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), D, time_domain)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[1]

    @property
    def p(self) -> int:
        return self.D.shape[0]

    @property
    def discrete(self) -> bool:
        return self.time_domain == "discrete"

    def scaled_output(self, alpha: float) -> "StateSpace":
        return StateSpace(self.A, self.B, alpha * self.C, alpha * self.D, self.time_domain)

    def to_dict(self) -> dict:
        return {"time_domain": self.time_domain,
                **{k: getattr(self, k).tolist() for k in "ABCD"}}

    @classmethod
    def from_dict(cls, data: dict) -> "StateSpace":
        """Parse the interchange format; dimension-inconsistent data is rejected."""
        missing = [k for k in ("A", "B", "C", "D") if k not in data]
        if missing:
            raise InvalidInputError(f"system file lacks fields {missing}")
        unknown = set(data) - {"A", "B", "C", "D", "time_domain"}
        if unknown:
            raise InvalidInputError(f"unknown fields {sorted(unknown)}")
        try:
            mats = {k: np.array(data[k], dtype=float) for k in "ABCD"}
        except (ValueError, TypeError) as exc:
            raise InvalidInputError(f"malformed matrix data: {exc}") from exc
        td = data.get("time_domain", "discrete")
        if mats["A"].size == 0:
            return cls.static(mats["D"], td)
        sys = cls(mats["A"], mats["B"], mats["C"], mats["D"], td)
        dims = [v for v in validate(sys).violations if v.startswith("dimension")]
        if dims:
            raise InvalidInputError("; ".join(dims))
        return sys


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`; ``ok`` iff there are no violations."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate(sys: StateSpace) -> ValidationReport:
    """Check dimension consistency and asymptotic stability."""
    report = ValidationReport()
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    if A.shape[0] != A.shape[1]:
        report.violations.append(f"dimension: A is {A.shape}, not square")
    n = A.shape[0]
    if B.shape[0] != n:
        report.violations.append(f"dimension: B has {B.shape[0]} rows, A has order {n}")
    if C.shape[1] != n:
        report.violations.append(f"dimension: C has {C.shape[1]} columns, A has order {n}")
    if D.shape != (C.shape[0], B.shape[1]):
        report.violations.append(
            f"dimension: D is {D.shape}, expected {(C.shape[0], B.shape[1])}")
    for name in "ABCD":
        if not np.all(np.isfinite(getattr(sys, name))):
            report.violations.append(f"finite: {name} has non-finite entries")
    if report.violations or n == 0:
        return report
    eig = np.linalg.eigvals(A)
    if sys.discrete:
        rho = float(np.max(np.abs(eig)))
        if not rho < 1.0:
            report.violations.append(f"stability: spectral radius {rho:.6g} >= 1")
    else:
        alpha = float(np.max(eig.real))
        if not alpha < 0.0:
            report.violations.append(f"stability: spectral abscissa {alpha:.6g} >= 0")
    return report


def require_valid(sys: StateSpace) -> StateSpace:
    """Raise unless ``validate(sys)`` passes."""
    report = validate(sys)
    if report.ok:
        return sys
    if any(v.startswith("stability") for v in report.violations) and \
            len(report.violations) == 1:
        raise StabilityError(report.violations[0])
    raise InvalidInputError("; ".join(report.violations))


def restrict_channels(sys: StateSpace, channels) -> StateSpace:
    """Keep the input channels ``channels`` (in the given order)."""
    idx = np.asarray(list(channels), dtype=int).ravel()
    if idx.size != len(set(idx.tolist())):
        raise InvalidInputError(f"duplicate channel indices in {idx.tolist()}")
    if idx.size and (idx.min() < 0 or idx.max() >= sys.m):
        raise InvalidInputError(f"channel indices {idx.tolist()} out of range 0..{sys.m - 1}")
    return StateSpace(sys.A, sys.B[:, idx], sys.C, sys.D[:, idx], sys.time_domain)


def _evaluation_point(sys: StateSpace, w):
    return np.exp(1j * w) if sys.discrete else 1j * w


def freq_response(sys: StateSpace, w: float) -> np.ndarray:
    """``M`` at ``z = exp(i w)`` (discrete) or ``s = i w`` (continuous).

    For continuous systems ``w = inf`` returns ``D``.
    """
    if not sys.discrete and np.isinf(w):
        return sys.D.astype(complex)
    z = _evaluation_point(sys, float(w))
    if sys.n == 0:
        return sys.D.astype(complex)
    X = complex_solve(z * np.eye(sys.n) - sys.A, sys.B)
    return sys.C @ X + sys.D


def freq_response_grid(sys: StateSpace, ws) -> np.ndarray:
    """Stacked responses, shape ``(len(ws), p, m)``; ``inf`` allowed in continuous time."""
    ws = np.asarray(ws, dtype=float).ravel()
    out = np.empty((ws.size, sys.p, sys.m), dtype=complex)
    out[:] = sys.D
    if sys.n == 0 or ws.size == 0:
        return out
    finite = np.isfinite(ws)
    z = _evaluation_point(sys, ws[finite])
    lhs = z[:, None, None] * np.eye(sys.n) - sys.A
    try:
        X = np.linalg.solve(lhs, np.broadcast_to(sys.B, (z.size,) + sys.B.shape))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("evaluation point is a pole of the system") from exc
    out[finite] = sys.C @ X + sys.D
    return out


def save_system(sys: StateSpace, path) -> None:
    Path(path).write_text(json.dumps(sys.to_dict(), indent=2))


def load_system(path) -> StateSpace:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return StateSpace.from_dict(data)
