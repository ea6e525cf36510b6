import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparsehinf.errors import InvalidInputError
from sparsehinf.sdp import Cone, ConicProgram, Model, check_solution, export_sdpa, smat, solve, svec
from sparsehinf.sdp.cones import cone_violation

from sdpa_reader import inner, read_sdpa


@settings(max_examples=50, deadline=None)
@given(arrays(float, (4, 4), elements=st.floats(-5, 5)))
def test_svec_roundtrip_and_isometry(G):
    S = G + G.T
    np.testing.assert_allclose(smat(svec(S)), S)
    T = np.eye(4) + np.outer(np.arange(4), np.arange(4))
    assert svec(S) @ svec(T) == pytest.approx(np.trace(S @ T))


def test_cone_validation():
    with pytest.raises(InvalidInputError):
        Cone("lorentz", 3)
    assert Cone("psd", 3).dim == 6
    assert Cone("free", 4).degree == 0


def test_program_shape_checks():
    with pytest.raises(InvalidInputError):
        ConicProgram(np.zeros(2), np.zeros((1, 3)), np.zeros(1), (Cone("nonneg", 2),))


def test_lp_optimum():
    # min x0 + 2 x1  s.t. x0 + x1 = 1, x >= 0  ->  1
    prog = ConicProgram(np.array([1.0, 2.0]), np.array([[1.0, 1.0]]), np.array([1.0]),
                        (Cone("nonneg", 2),))
    sol = solve(prog)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [1.0, 0.0], atol=1e-7)
    assert sol.obj_primal == pytest.approx(1.0, abs=1e-7)
    assert check_solution(prog, sol).within(prog)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_min_eigenvalue_sdp(seed):
    # min <C, X> s.t. tr X = 1, X psd  ->  lambda_min(C)
    rng = np.random.RandomState(seed)
    G = rng.standard_normal((4, 4))
    C = G + G.T
    model = Model()
    X = model.psd(4, name="X")
    model.add_eq(X.trace(), 1.0)
    model.minimize((C @ X).trace())
    sol = solve(model.build())
    assert sol.status == "optimal"
    assert sol.obj_primal == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-6)


def test_primal_infeasible_detected():
    prog = ConicProgram(np.array([1.0]), np.array([[1.0]]), np.array([-1.0]),
                        (Cone("nonneg", 1),))
    assert solve(prog).status == "primal_infeasible"


def test_dual_infeasible_detected():
    # min -x0 s.t. x0 - x1 = 0, x >= 0 is unbounded
    prog = ConicProgram(np.array([-1.0, 0.0]), np.array([[1.0, -1.0]]), np.array([0.0]),
                        (Cone("nonneg", 2),))
    assert solve(prog).status == "dual_infeasible"


def test_inconsistent_equalities():
    prog = ConicProgram(np.zeros(2), np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 2.0]),
                        (Cone("free", 2),))
    assert solve(prog).status == "primal_infeasible"


def test_model_free_symmetric_and_value():
    model = Model()
    Y = model.free((2, 2), symmetric=True, name="Y")
    model.add_eq(Y, np.array([[1.0, 2.0], [2.0, 3.0]]), symmetric=True)
    model.minimize(Y.trace())
    sol = solve(model.build())
    np.testing.assert_allclose(model.value("Y", sol.x), [[1, 2], [2, 3]], atol=1e-7)


def test_cone_violation_psd():
    v = svec(np.diag([1.0, -0.5]))
    assert cone_violation((Cone("psd", 2),), v) == pytest.approx(0.5)


def _sample_program(seed):
    rng = np.random.RandomState(seed)
    model = Model()
    X = model.psd(3)
    z = model.free(2)
    u = model.nonneg(2)
    model.add_eq(X.trace() + z[0, 0], 1.0)
    model.add_eq(u.sum() - z[1, 0], 0.5)
    model.minimize((np.diag(rng.uniform(1, 2, 3)) @ X).trace() + u.sum())
    return model.build()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sdpa_roundtrip(seed):
    prog = _sample_program(seed)
    data = read_sdpa(export_sdpa(prog))
    assert data["m"] == prog.n_eq
    assert len(data["sizes"]) == sum(1 for c in prog.cones if c.dim)
    np.testing.assert_allclose(data["c"], prog.b)
    # <F_i, Y(x)> reproduces (A x)_i and <F_0, Y(x)> = -c @ x
    x = np.random.RandomState(seed).standard_normal(prog.dim)
    blocks, start = [], 0
    for cone in prog.cones:
        part = x[start:start + cone.dim]
        start += cone.dim
        if cone.kind == "free":
            blocks.append(np.diag(np.r_[np.maximum(part, 0), np.maximum(-part, 0)]))
        elif cone.kind == "nonneg":
            blocks.append(np.diag(part))
        else:
            blocks.append(smat(part))
    Ax = prog.A @ x
    for i in range(prog.n_eq):
        assert inner(data["F"][i + 1], blocks) == pytest.approx(Ax[i])
    assert inner(data["F"][0], blocks) == pytest.approx(-prog.c @ x)


@pytest.mark.parametrize("seed, k", [(2, 1), (8, 2)])
def test_boundary_rows_converge(seed, k):
    # l1 bound rows whose variables all reach the boundary at the optimum
    from sparsehinf.generators import gen_er_random
    from sparsehinf.ksparse import _normalize, _relaxation_model
    scaled, _, _ = _normalize(gen_er_random(20, 0.1, weight_seed=seed))
    prog = _relaxation_model(scaled, k, "max").build()
    sol = solve(prog)
    assert sol.status == "optimal"
    assert check_solution(prog, sol).within(prog, 1e-7)
