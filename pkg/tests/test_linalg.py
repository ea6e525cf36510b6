import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparsehinf.errors import InvalidInputError, NotPSDError, SingularMatrixError
from sparsehinf.linalg import (complex_solve, null_basis, psd_factor, spectral_radius,
                               sym_eig, symmetrize)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_sym_eig_uses_upper_triangle():
    S = np.array([[2.0, 1.0], [99.0, 2.0]])
    w, V = sym_eig(S)
    np.testing.assert_allclose(w, [1.0, 3.0])
    np.testing.assert_allclose(V @ np.diag(w) @ V.T, symmetrize(S), atol=1e-12)


def test_sym_eig_rejects_nonsquare_and_nan():
    with pytest.raises(InvalidInputError):
        sym_eig(np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        sym_eig([[np.nan]])


@pytest.mark.parametrize("M, dim", [
    (np.array([[1.0, 1.0]]), 1),
    (np.eye(3), 0),
    (np.zeros((2, 3)), 3),
    (np.zeros((0, 4)), 4),
])
def test_null_basis_dimension(M, dim):
    N = null_basis(M)
    assert N.shape == (M.shape[1], dim)
    np.testing.assert_allclose(N.T @ N, np.eye(dim), atol=1e-12)
    if M.size:
        np.testing.assert_allclose(M @ N, 0.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 5), elements=finite))
def test_null_basis_property(M):
    N = null_basis(M)
    assert N.shape[1] >= 2
    np.testing.assert_allclose(M @ N, 0.0, atol=1e-8 * (1 + np.abs(M).max()))


def test_psd_factor_rank_and_reconstruction():
    v = np.array([[1.0], [2.0], [2.0]])
    F = psd_factor(v @ v.T)
    assert F.shape == (3, 1)
    np.testing.assert_allclose(F @ F.T, v @ v.T, atol=1e-12)


def test_psd_factor_rejects_indefinite():
    with pytest.raises(NotPSDError):
        psd_factor(np.diag([1.0, -1.0]))


def test_psd_factor_clamps_roundoff():
    F = psd_factor(np.diag([1.0, -1e-14]))
    assert F.shape == (2, 1)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (4, 4), elements=finite))
def test_psd_factor_property(G):
    S = G @ G.T
    F = psd_factor(S)
    np.testing.assert_allclose(F @ F.T, S, atol=1e-7 * (1 + np.abs(S).max()))


@pytest.mark.parametrize("A, rho", [
    (np.diag([0.5, -0.9]), 0.9),
    (np.array([[0.0, 1.0], [-1.0, 0.0]]), 1.0),
    (np.zeros((0, 0)), 0.0),
])
def test_spectral_radius(A, rho):
    assert spectral_radius(A) == pytest.approx(rho)


def test_complex_solve_and_singular():
    M = np.array([[1j, 0], [0, 2]])
    np.testing.assert_allclose(complex_solve(M, [1, 1]), [-1j, 0.5])
    with pytest.raises(SingularMatrixError):
        complex_solve(np.zeros((2, 2)), np.ones(2))
