"""Full-order output-feedback synthesis against the relaxed k-sparse gain.

Two convex programs are solved in sequence. The first works on the pair
``(P, Q)`` of plant-order certificates with the controller eliminated
through kernel bases of the actuator and sensor maps. A closed-loop
certificate ``P_cl`` is then assembled from ``(P, Q)`` and, with ``P_cl``
fixed, the second program is linear in the controller matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NotPSDError, SynthesisError
from .hinf import hinf_norm
from .ksparse import DEFAULT_BUDGET, exact_exhaustive
from .linalg import null_basis, psd_factor, spectral_radius, sym_eig
from .sdp import Model, solve
from .sdp.model import block
from .statespace import StateSpace

PLANT_FIELDS = ("A", "B1", "B2", "C1", "D11", "D12", "C2", "D21")
EPS_BASE = 1e-7


def _mat(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or not np.all(np.isfinite(M)):
        raise InvalidInputError("plant and controller data must be finite matrices")
    return M


@dataclass(frozen=True, eq=False)
class Plant:
    """Generalized discrete-time plant with ``D22 = 0``::

        x+ = A x + B1 w + B2 u
        z  = C1 x + D11 w + D12 u
        y  = C2 x + D21 w
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D21: np.ndarray

    def __post_init__(self):
        for name in PLANT_FIELDS:
            object.__setattr__(self, name, _mat(getattr(self, name)))
        n = self.A.shape[0]
        expect = {
            "A": (n, n), "B1": (n, self.m), "B2": (n, self.nu),
            "C1": (self.nz, n), "D11": (self.nz, self.m), "D12": (self.nz, self.nu),
            "C2": (self.ny, n), "D21": (self.ny, self.m),
        }
        bad = [f"{k} is {getattr(self, k).shape}, expected {v}"
               for k, v in expect.items() if getattr(self, k).shape != v]
        if bad:
            raise InvalidInputError("inconsistent plant dimensions: " + "; ".join(bad))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B1.shape[1]

    @property
    def nu(self) -> int:
        return self.B2.shape[1]

    @property
    def nz(self) -> int:
        return self.C1.shape[0]

    @property
    def ny(self) -> int:
        return self.C2.shape[0]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in PLANT_FIELDS}

    @classmethod
    def from_dict(cls, data: dict) -> "Plant":
        unknown = set(data) - set(PLANT_FIELDS) - {"D22", "time_domain"}
        if unknown:
            raise InvalidInputError(f"unknown plant fields {sorted(unknown)}")
        missing = [k for k in PLANT_FIELDS if k not in data]
        if missing:
            raise InvalidInputError(f"plant file lacks fields {missing}")
        if data.get("time_domain", "discrete") != "discrete":
            raise InvalidInputError("synthesis supports discrete-time plants only")
        if "D22" in data and np.any(np.asarray(data["D22"], dtype=float) != 0):
            raise InvalidInputError("nonzero D22 is not supported")
        return cls(**{k: data[k] for k in PLANT_FIELDS})


def load_plant(path) -> Plant:
    try:
        return Plant.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def table1_plant() -> Plant:
    """The three-state benchmark plant shipped with the package."""
    text = resources.files("sparsehinf.data").joinpath("table1_plant.json").read_text()
    return Plant.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Controller:
    """Dynamic output feedback ``zeta+ = AK zeta + BK y``, ``u = CK zeta + DK y``."""

    AK: np.ndarray
    BK: np.ndarray
    CK: np.ndarray
    DK: np.ndarray

    def __post_init__(self):
        for name in ("AK", "BK", "CK", "DK"):
            object.__setattr__(self, name, _mat(getattr(self, name)))
        nk = self.AK.shape[0]
        if self.AK.shape != (nk, nk) or self.BK.shape[0] != nk or self.CK.shape[1] != nk \
                or self.DK.shape != (self.CK.shape[0], self.BK.shape[1]):
            raise InvalidInputError("inconsistent controller dimensions")

    @classmethod
    def zeros(cls, plant: Plant) -> "Controller":
        n = plant.n
        return cls(np.zeros((n, n)), np.zeros((n, plant.ny)), np.zeros((plant.nu, n)),
                   np.zeros((plant.nu, plant.ny)))


def save_controller(ctrl: Controller, path, metadata: dict | None = None) -> None:
    data = {f"{k[0]}_K": getattr(ctrl, k).tolist() for k in ("AK", "BK", "CK", "DK")}
    data["metadata"] = metadata or {}
    Path(path).write_text(json.dumps(data, indent=2))


def load_controller(path):
    """Returns ``(controller, metadata)``."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    meta = data.pop("metadata", {})
    keys = {"A_K", "B_K", "C_K", "D_K"}
    if set(data) != keys:
        raise InvalidInputError(f"controller file must hold exactly {sorted(keys)} and metadata")
    return Controller(**{k.replace("_", ""): v for k, v in data.items()}), meta


def _loop_maps(plant: Plant):
    """``(Abar, Bbar, Cbar, B1bar, D21bar, C1bar, D12bar)`` with ``A_cl = Abar + Bbar Theta Cbar``."""
    n, nu, ny = plant.n, plant.nu, plant.ny
    Abar = scipy.linalg.block_diag(plant.A, np.zeros((n, n)))
    Bbar = scipy.linalg.block_diag(plant.B2, np.eye(n))
    Cbar = scipy.linalg.block_diag(plant.C2, np.eye(n))
    B1bar = np.vstack([plant.B1, np.zeros((n, plant.m))])
    D21bar = np.vstack([plant.D21, np.zeros((n, plant.m))])
    C1bar = np.hstack([plant.C1, np.zeros((plant.nz, n))])
    D12bar = np.hstack([plant.D12, np.zeros((plant.nz, n))])
    return Abar, Bbar, Cbar, B1bar, D21bar, C1bar, D12bar


def close_loop(plant: Plant, ctrl: Controller) -> StateSpace:
    """Closed loop from ``w`` to ``z`` (state ``[x; zeta]``)."""
    if ctrl.AK.shape[0] != plant.n or ctrl.BK.shape[1] != plant.ny or ctrl.CK.shape[0] != plant.nu:
        raise InvalidInputError("controller dimensions do not match the plant")
    Abar, Bbar, Cbar, B1bar, D21bar, C1bar, D12bar = _loop_maps(plant)
    Theta = np.block([[ctrl.DK, ctrl.CK], [ctrl.BK, ctrl.AK]])
    return StateSpace(Abar + Bbar @ Theta @ Cbar,
                      B1bar + Bbar @ Theta @ D21bar,
                      C1bar + D12bar @ Theta @ Cbar,
                      plant.D11 + D12bar @ Theta @ D21bar)


def _margin(const: np.ndarray, eps: float) -> float:
    return eps * (1.0 + np.linalg.norm(const))


def _abs_bound(model: Model, Y, t):
    iu, ju = np.triu_indices(Y.shape[0])
    tcol = np.ones((iu.size, 1)) @ t
    Yu = Y[iu, ju].T
    model.add_nonneg(tcol - Yu)
    model.add_nonneg(tcol + Yu)


def _stage1_model(plant: Plant, k: int, eps: float, pin_t: bool):
    n, m, nz = plant.n, plant.m, plant.nz
    A, B1, C1, D11 = plant.A, plant.B1, plant.C1, plant.D11
    Nc = null_basis(np.hstack([plant.B2.T, plant.D12.T]))
    No = null_basis(np.hstack([plant.C2, plant.D21]))
    Pic = scipy.linalg.block_diag(Nc, np.eye(m))
    Pio = scipy.linalg.block_diag(No, np.eye(nz))

    model = Model()
    P = model.free((n, n), symmetric=True, name="P")
    Q = model.free((n, n), symmetric=True, name="Q")
    lam = model.nonneg(1, name="lam")
    T = lam.times(np.eye(m))
    if not pin_t:
        t = model.nonneg(1, name="t")
        Y = model.free((m, m), symmetric=True, name="Y")
        T = T + Y
        _abs_bound(model, Y, t)

    I_n = np.eye(n)
    coupling = block([[P, I_n], [I_n, Q]])
    model.add_psd(coupling - _margin(np.block([[0 * I_n, I_n], [I_n, 0 * I_n]]), eps)
                  * np.eye(2 * n), name="coupling")

    # controllability-side block, ordered (x, z, w)
    Ux = np.vstack([A, C1, np.zeros((m, n))])
    Ex = np.eye(n + nz + m, n)
    Ew = np.eye(n + nz + m)[:, n + nz:]
    c1 = np.block([[np.zeros((n, n)), np.zeros((n, nz)), B1],
                   [np.zeros((nz, n)), -np.eye(nz), D11],
                   [B1.T, D11.T, np.zeros((m, m))]])
    L1 = c1 + Ux @ Q @ Ux.T - Ex @ Q @ Ex.T - Ew @ T @ Ew.T
    eps1 = _margin(Pic.T @ c1 @ Pic, eps)
    model.add_psd(-(Pic.T @ L1 @ Pic) - eps1 * np.eye(Pic.shape[1]), name="ctrl")

    # observability-side block, ordered (x, w, z)
    G = np.hstack([A, B1, np.zeros((n, nz))])
    Fx = np.eye(n + m + nz, n)
    Fw = np.eye(n + m + nz)[:, n:n + m]
    c2 = np.block([[np.zeros((n, n)), np.zeros((n, m)), C1.T],
                   [np.zeros((m, n)), np.zeros((m, m)), D11.T],
                   [C1, D11, -np.eye(nz)]])
    L2 = c2 + G.T @ P @ G - Fx @ P @ Fx.T - Fw @ T @ Fw.T
    eps2 = _margin(Pio.T @ c2 @ Pio, eps)
    model.add_psd(-(Pio.T @ L2 @ Pio) - eps2 * np.eye(Pio.shape[1]), name="obs")

    model.minimize(lam if pin_t else lam + float(k) * t)
    return model


def _check_k(plant: Plant, k: int) -> int:
    if isinstance(k, bool) or int(k) != k or not 1 <= int(k) <= plant.m:
        raise InvalidInputError(f"k={k!r} outside 1..{plant.m}")
    return int(k)


def solve_stage1(plant: Plant, k: int, eps: float = EPS_BASE, pin_t: bool = False,
                 tol: float = 1e-8) -> dict:
    """First program: certificates ``(P, Q)`` and the relaxed bound ``lam + k t``.

    Raises
    ------
    SynthesisError
        With ``stage=1`` when the program is infeasible or the solver fails.
    """
    k = _check_k(plant, k)
    model = _stage1_model(plant, k, eps, pin_t)
    prog = model.build()
    sol = solve(prog, tol=tol)
    if sol.status != "optimal":
        raise SynthesisError(f"first synthesis program ended with {sol.status}", stage="stage1")
    m = plant.m
    lam = float(model.value("lam", sol.x)[0, 0])
    t = 0.0 if pin_t else float(model.value("t", sol.x)[0, 0])
    Y = np.zeros((m, m)) if pin_t else model.value("Y", sol.x)
    return {"P": model.value("P", sol.x), "Q": model.value("Q", sol.x), "lam": lam, "t": t,
            "Y": Y, "value": lam + k * t, "eps": eps, "program": prog, "solution": sol}


def build_pcl(P, Q, tol: float | None = None) -> np.ndarray:
    """Closed-loop certificate ``[[P, P2], [P2^T, I]]`` with ``P - Q^{-1} = P2 P2^T``.

    ``P2`` is padded with zero columns to a square ``n x n`` block.
    """
    P = 0.5 * (np.asarray(P, dtype=float) + np.asarray(P, dtype=float).T)
    Q = 0.5 * (np.asarray(Q, dtype=float) + np.asarray(Q, dtype=float).T)
    n = P.shape[0]
    try:
        Qinv = np.linalg.inv(Q)
    except np.linalg.LinAlgError as exc:
        raise NotPSDError("Q is singular") from exc
    if sym_eig(Q)[0][0] <= 0:
        raise NotPSDError("Q is not positive definite")
    S = P - Qinv
    S = 0.5 * (S + S.T)
    F = psd_factor(S, tol)
    P2 = np.zeros((n, n))
    P2[:, :min(n, F.shape[1])] = F[:, :n]
    return np.block([[P, P2], [P2.T, np.eye(n)]])


def stage2_lmi(plant: Plant, Pcl, ctrl: Controller, lam: float, Y) -> np.ndarray:
    """Numeric value of the controller-side block matrix (must be positive definite)."""
    cl = close_loop(plant, ctrl)
    N2, nz, m = 2 * plant.n, plant.nz, plant.m
    T = lam * np.eye(m) + np.asarray(Y)
    M = np.block([
        [np.linalg.inv(Pcl), np.zeros((N2, nz)), cl.A, cl.B],
        [np.zeros((nz, N2)), np.eye(nz), cl.C, cl.D],
        [cl.A.T, cl.C.T, Pcl, np.zeros((N2, m))],
        [cl.B.T, cl.D.T, np.zeros((m, N2)), T]])
    return 0.5 * (M + M.T)


def solve_stage2(plant: Plant, Pcl, k: int, eps: float = EPS_BASE, pin_t: bool = False,
                 tol: float = 1e-8) -> dict:
    """Second program: controller matrices for a fixed closed-loop certificate."""
    k = _check_k(plant, k)
    n, m, nz, nu, ny = plant.n, plant.m, plant.nz, plant.nu, plant.ny
    Pcl = 0.5 * (np.asarray(Pcl, dtype=float) + np.asarray(Pcl, dtype=float).T)
    Pinv = np.linalg.inv(Pcl)
    Pinv = 0.5 * (Pinv + Pinv.T)
    Abar, Bbar, Cbar, B1bar, D21bar, C1bar, D12bar = _loop_maps(plant)

    model = Model()
    Theta = model.free((nu + n, ny + n), name="Theta")
    lam = model.nonneg(1, name="lam")
    T = lam.times(np.eye(m))
    if not pin_t:
        t = model.nonneg(1, name="t")
        Y = model.free((m, m), symmetric=True, name="Y")
        T = T + Y
        _abs_bound(model, Y, t)
    Acl = Abar + Bbar @ Theta @ Cbar
    Bcl = B1bar + Bbar @ Theta @ D21bar
    Ccl = C1bar + D12bar @ Theta @ Cbar
    Dcl = plant.D11 + D12bar @ Theta @ D21bar
    N2 = 2 * n
    big = block([
        [Pinv, np.zeros((N2, nz)), Acl, Bcl],
        [np.zeros((nz, N2)), np.eye(nz), Ccl, Dcl],
        [Acl.T, Ccl.T, Pcl, np.zeros((N2, m))],
        [Bcl.T, Dcl.T, np.zeros((m, N2)), T]])
    margin = _margin(scipy.linalg.block_diag(Pinv, np.eye(nz), Pcl), eps)
    model.add_psd(big - margin * np.eye(big.shape[0]), name="lmi")
    model.minimize(lam if pin_t else lam + float(k) * t)
    prog = model.build()
    sol = solve(prog, tol=tol)
    if sol.status != "optimal":
        raise SynthesisError(f"second synthesis program ended with {sol.status}", stage="stage2")
    Th = model.value("Theta", sol.x)
    ctrl = Controller(AK=Th[nu:, ny:], BK=Th[nu:, :ny], CK=Th[:nu, ny:], DK=Th[:nu, :ny])
    lam_v = float(model.value("lam", sol.x)[0, 0])
    t_v = 0.0 if pin_t else float(model.value("t", sol.x)[0, 0])
    Y_v = np.zeros((m, m)) if pin_t else model.value("Y", sol.x)
    rho = spectral_radius(close_loop(plant, ctrl).A)
    if not rho < 1.0:
        raise SynthesisError(f"closed loop has spectral radius {rho:.6g}", stage="stage2")
    return {"controller": ctrl, "lam": lam_v, "t": t_v, "Y": Y_v, "value": lam_v + k * t_v,
            "eps": eps, "spectral_radius": rho, "program": prog, "solution": sol,
            "lmi_min_eig": float(sym_eig(stage2_lmi(plant, Pcl, ctrl, lam_v, Y_v))[0][0])}


@dataclass
class SynthesisResult:
    """Controller with its certified bound and the intermediate certificates."""

    controller: Controller
    bound: float
    P_cl: np.ndarray
    stage1: dict = field(repr=False)
    stage2: dict = field(repr=False)
    k: int = 1
    attempts: int = 1

    def metadata(self) -> dict:
        return {"k": self.k, "bound": self.bound,
                "stage1_value": self.stage1["value"], "stage2_value": self.stage2["value"],
                "eps": self.stage2["eps"], "attempts": self.attempts}


def synthesize(plant: Plant, k: int, eps: float = EPS_BASE, retries: int = 4,
               pin_t: bool = False, tol: float = 1e-8) -> SynthesisResult:
    """Run both programs; on a failed second stage, double the margin and restart.

    The margin applies to every strict inequality in both programs, so a
    larger value moves ``(P, Q)`` away from the coupling boundary where
    ``P_cl`` is reconstructed.
    """
    k = _check_k(plant, k)
    last = None
    for attempt in range(retries + 1):
        cur = eps * 2.0 ** attempt
        s1 = solve_stage1(plant, k, cur, pin_t, tol)
        try:
            Pcl = build_pcl(s1["P"], s1["Q"])
            s2 = solve_stage2(plant, Pcl, k, cur, pin_t, tol)
        except (SynthesisError, NotPSDError, np.linalg.LinAlgError) as exc:
            last = exc
            continue
        return SynthesisResult(controller=s2["controller"], bound=math.sqrt(max(s2["value"], 0.0)),
                               P_cl=Pcl, stage1=s1, stage2=s2, k=k, attempts=attempt + 1)
    raise SynthesisError(f"second stage failed after {retries + 1} attempts: {last}", stage="stage2")


def evaluate_controller(plant: Plant, ctrl: Controller, k_list,
                        budget: int = DEFAULT_BUDGET) -> dict:
    """Exhaustive k-sparse peak gains of the closed loop, plus its full peak gain.

    Returns a mapping ``{k: value}`` with an extra ``"hinf"`` entry.
    """
    cl = close_loop(plant, ctrl)
    rho = spectral_radius(cl.A)
    if not rho < 1.0:
        raise InvalidInputError(f"closed loop is unstable (spectral radius {rho:.6g})")
    out = {}
    for k in k_list:
        out[int(k)] = exact_exhaustive(cl, int(k), "max", budget)[1]
    out["hinf"] = hinf_norm(cl).value
    return out
