import numpy as np
import pytest

from sparsehinf import StateSpace


@pytest.fixture
def scalar():
    """x+ = 0.5 x + w, z = x: peak gain 2 at theta = 0, minimum 2/3 at pi."""
    return StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]])


@pytest.fixture
def static_eye():
    return StateSpace.static(np.eye(2))


@pytest.fixture
def static_row():
    return StateSpace.static([[1.0, 1.0]])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
