import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsehinf import StateSpace, freq_response, restrict_channels, validate
from sparsehinf.errors import InvalidInputError, StabilityError
from sparsehinf.generators import gen_random_stable
from sparsehinf.statespace import (freq_response_grid, load_system, require_valid,
                                   save_system)


def test_static_system_shapes():
    s = StateSpace.static([[1.0, 2.0, 3.0]])
    assert (s.n, s.m, s.p) == (0, 3, 1)
    assert validate(s).ok


def test_bad_time_domain():
    with pytest.raises(InvalidInputError):
        StateSpace([[0.0]], [[1.0]], [[1.0]], [[0.0]], "hybrid")


@pytest.mark.parametrize("kwargs, prefix", [
    (dict(A=np.zeros((2, 3)), B=np.zeros((2, 1)), C=np.zeros((1, 2)), D=[[0.0]]), "dimension"),
    (dict(A=[[0.5]], B=[[1.0, 1.0]], C=[[1.0]], D=[[0.0]]), "dimension"),
    (dict(A=[[0.5]], B=[[np.inf]], C=[[1.0]], D=[[0.0]]), "finite"),
    (dict(A=[[1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]]), "stability"),
])
def test_validate_reports(kwargs, prefix):
    report = validate(StateSpace(**kwargs))
    assert not report
    assert any(v.startswith(prefix) for v in report.violations)


def test_continuous_stability_uses_abscissa():
    assert validate(StateSpace([[-0.1]], [[1.0]], [[1.0]], [[0.0]], "continuous")).ok
    assert not validate(StateSpace([[0.1]], [[1.0]], [[1.0]], [[0.0]], "continuous")).ok


def test_require_valid_error_types():
    with pytest.raises(StabilityError):
        require_valid(StateSpace([[1.2]], [[1.0]], [[1.0]], [[0.0]]))
    with pytest.raises(InvalidInputError):
        require_valid(StateSpace([[0.2]], [[1.0]], [[1.0, 1.0]], [[0.0]]))


def test_restrict_channels(scalar):
    s = StateSpace(np.diag([0.1, 0.2]), np.eye(2), np.eye(2), np.zeros((2, 2)))
    r = restrict_channels(s, [1])
    np.testing.assert_array_equal(r.B, [[0.0], [1.0]])
    with pytest.raises(InvalidInputError):
        restrict_channels(s, [0, 0])
    with pytest.raises(InvalidInputError):
        restrict_channels(s, [2])


def test_freq_response_scalar(scalar):
    np.testing.assert_allclose(freq_response(scalar, 0.0), [[2.0]])
    np.testing.assert_allclose(freq_response(scalar, np.pi), [[-2.0 / 3.0]])


def test_freq_response_continuous_infinity():
    s = StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.25]], "continuous")
    np.testing.assert_allclose(freq_response(s, np.inf), [[0.25]])
    np.testing.assert_allclose(freq_response(s, 0.0), [[1.25]])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, np.pi))
def test_grid_matches_pointwise(seed, w):
    s = gen_random_stable(3, 2, 2, seed=seed)
    np.testing.assert_allclose(freq_response_grid(s, [w])[0], freq_response(s, w), atol=1e-10)


def test_save_load_roundtrip(tmp_path):
    s = gen_random_stable(3, 2, 1, seed=4)
    path = tmp_path / "sys.json"
    save_system(s, path)
    t = load_system(path)
    for name in "ABCD":
        np.testing.assert_array_equal(getattr(s, name), getattr(t, name))


def test_load_static_roundtrip(tmp_path, static_row):
    path = tmp_path / "static.json"
    save_system(static_row, path)
    assert load_system(path).n == 0


def test_load_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n"A": [[0.5]],\n"B": oops}\n')
    with pytest.raises(InvalidInputError, match="line 3"):
        load_system(path)


@pytest.mark.parametrize("data", [
    {"A": [[0.5]], "B": [[1.0]], "C": [[1.0]]},
    {"A": [[0.5]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]], "E": 1},
    {"A": [[0.5]], "B": [[1.0], [2.0]], "C": [[1.0]], "D": [[0.0]]},
    {"A": [[0.5]], "B": "x", "C": [[1.0]], "D": [[0.0]]},
])
def test_from_dict_rejects(data, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data))
    with pytest.raises(InvalidInputError):
        load_system(path)
