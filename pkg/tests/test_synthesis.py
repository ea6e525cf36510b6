import json

import numpy as np
import pytest

from sparsehinf.errors import InvalidInputError, NotPSDError, SynthesisError
from sparsehinf.hinf import hinf_norm
from sparsehinf.ksparse import exact_exhaustive
from sparsehinf.linalg import spectral_radius
from sparsehinf.synthesis import (Controller, Plant, build_pcl, close_loop, evaluate_controller,
                                  load_controller, load_plant, save_controller, solve_stage1,
                                  solve_stage2, stage2_lmi, synthesize, table1_plant)


def _full_access_plant(A):
    """Two states, full actuation and measurement, unit disturbance on every state."""
    n = A.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    return Plant(A=A, B1=I, B2=I, C1=np.vstack([I, Z]), D11=np.zeros((2 * n, n)),
                 D12=np.vstack([Z, I]), C2=I, D21=Z)


@pytest.fixture(scope="module")
def plant():
    return table1_plant()


@pytest.fixture(scope="module")
def k1_result(plant):
    return synthesize(plant, 1)


def test_plant_dimensions(plant):
    assert (plant.n, plant.m, plant.nu, plant.nz, plant.ny) == (3, 6, 3, 6, 3)
    with pytest.raises(InvalidInputError):
        Plant(**{**{k: getattr(plant, k) for k in ("A", "B1", "B2", "C1", "D11", "D12", "C2")},
                 "D21": np.zeros((3, 5))})


def test_plant_file_rejects_d22(tmp_path, plant):
    data = plant.to_dict()
    data["D22"] = np.ones((3, 3)).tolist()
    path = tmp_path / "p.json"
    path.write_text(json.dumps(data))
    with pytest.raises(InvalidInputError, match="D22"):
        load_plant(path)
    data["D22"] = np.zeros((3, 3)).tolist()
    path.write_text(json.dumps(data))
    assert load_plant(path).n == 3


def test_zero_controller_closed_loop(plant):
    cl = close_loop(plant, Controller.zeros(plant))
    n = plant.n
    np.testing.assert_array_equal(cl.A[:n, :n], plant.A)
    np.testing.assert_array_equal(cl.A[n:, :], 0.0)
    np.testing.assert_array_equal(cl.B, np.vstack([plant.B1, np.zeros((n, plant.m))]))
    np.testing.assert_array_equal(cl.C, np.hstack([plant.C1, np.zeros((plant.nz, n))]))
    np.testing.assert_array_equal(cl.D, plant.D11)


def test_close_loop_dimension_mismatch(plant):
    with pytest.raises(InvalidInputError):
        close_loop(plant, Controller(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((3, 2)),
                                     np.zeros((3, 3))))


def test_close_loop_decoupled_blocks():
    A = np.diag([0.5, 0.2])
    p = _full_access_plant(A)
    p = Plant(**{**{k: getattr(p, k) for k in ("A", "B1", "C1", "D11", "D12", "C2", "D21")},
                 "B2": np.zeros((2, 2))})
    AK = np.diag([0.9, -0.3])
    ctrl = Controller(AK, np.zeros((2, 2)), np.eye(2), np.eye(2))
    cl = close_loop(p, ctrl)
    np.testing.assert_allclose(sorted(np.linalg.eigvals(cl.A).real), [-0.3, 0.2, 0.5, 0.9])


def test_build_pcl_examples():
    np.testing.assert_allclose(build_pcl([[2.0]], [[1.0]]), [[2.0, 1.0], [1.0, 1.0]])
    P = np.array([[2.0, 0.5], [0.5, 1.0]])
    Pcl = build_pcl(P, np.linalg.inv(P))
    np.testing.assert_allclose(Pcl, np.block([[P, np.zeros((2, 2))], [np.zeros((2, 2)), np.eye(2)]]),
                               atol=1e-12)
    with pytest.raises(NotPSDError):
        build_pcl([[0.5]], [[1.0]])


def test_build_pcl_schur_identity():
    rng = np.random.RandomState(0)
    G = rng.standard_normal((3, 3))
    Q = G @ G.T + np.eye(3)
    P = np.linalg.inv(Q) + 0.3 * np.eye(3)
    Pcl = build_pcl(P, Q)
    P2 = Pcl[:3, 3:]
    np.testing.assert_allclose(P - P2 @ P2.T, np.linalg.inv(Q), atol=1e-10)
    assert np.linalg.eigvalsh(Pcl)[0] > 0


def test_table1_k1_pipeline(plant, k1_result):
    res = k1_result
    cl = close_loop(plant, res.controller)
    assert spectral_radius(cl.A) < 1
    # bound dominance and stage consistency
    assert res.bound >= exact_exhaustive(cl, 1)[1] - 1e-6
    assert res.stage2["value"] >= res.stage1["value"] - 1e-6
    M = stage2_lmi(plant, res.P_cl, res.controller, res.stage2["lam"], res.stage2["Y"])
    assert np.linalg.eigvalsh(M)[0] >= -1e-7
    assert np.linalg.eigvalsh(res.P_cl)[0] > 0


def test_full_support_t_vanishes(plant):
    s1 = solve_stage1(plant, plant.m)
    pinned = solve_stage1(plant, plant.m, pin_t=True)
    assert s1["value"] == pytest.approx(pinned["value"], abs=1e-4)
    s2 = solve_stage2(plant, build_pcl(s1["P"], s1["Q"]), plant.m)
    assert s2["t"] <= 1e-6


@pytest.mark.parametrize("k", [1, 2])
def test_full_access_plant_feasible(k):
    p = _full_access_plant(np.array([[1.2, 0.3], [0.0, 0.5]]))
    res = synthesize(p, k)
    assert spectral_radius(close_loop(p, res.controller).A) < 1


def test_unstabilizable_plant_fails():
    p = _full_access_plant(np.diag([1.5, 0.5]))
    p = Plant(**{**{k: getattr(p, k) for k in ("A", "B1", "C1", "D11", "D12", "C2", "D21")},
                 "B2": np.zeros((2, 2))})
    with pytest.raises(SynthesisError) as info:
        synthesize(p, 1, retries=0)
    assert info.value.stage == "stage1"


def test_evaluate_controller(plant, k1_result):
    table = evaluate_controller(plant, k1_result.controller, [1, 6])
    cl = close_loop(plant, k1_result.controller)
    assert table[6] == pytest.approx(table["hinf"], rel=1e-9)
    assert table["hinf"] == hinf_norm(cl).value
    assert table[1] <= table[6]


def test_evaluate_zero_disturbance():
    p = _full_access_plant(np.diag([0.5, 0.2]))
    p = Plant(**{**{k: getattr(p, k) for k in ("A", "B2", "C1", "D12", "C2")},
                 "B1": np.zeros((2, 2)), "D11": np.zeros((4, 2)), "D21": np.zeros((2, 2))})
    table = evaluate_controller(p, Controller.zeros(p), [1, 2])
    assert table == {1: 0.0, 2: 0.0, "hinf": 0.0}


def test_evaluate_rejects_unstable_loop():
    p = _full_access_plant(np.diag([1.5, 0.2]))
    with pytest.raises(InvalidInputError):
        evaluate_controller(p, Controller.zeros(p), [1])


def test_controller_file_roundtrip(tmp_path, k1_result):
    path = tmp_path / "ctrl.json"
    save_controller(k1_result.controller, path, k1_result.metadata())
    ctrl, meta = load_controller(path)
    np.testing.assert_array_equal(ctrl.AK, k1_result.controller.AK)
    assert meta["k"] == 1 and meta["bound"] == k1_result.bound
    assert set(json.loads(path.read_text())) == {"A_K", "B_K", "C_K", "D_K", "metadata"}
