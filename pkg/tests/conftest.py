import numpy as np
import pytest

from wishart_libor import TenorCurve, WishartParams, fit_term_structure
from wishart_libor.verify import benchmark_jump_ou

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def model():
    return WishartParams(np.diag([3.75, 3.45]), np.diag([-0.0003125, -0.0005]), np.diag([0.034, 0.042]), 3.0)


@pytest.fixture(scope="session")
def curve():
    return TenorCurve.flat(1.0 / 3.0, 12, 0.05)


@pytest.fixture(scope="session")
def family(model, curve):
    return fit_term_structure(model, curve)


@pytest.fixture(scope="session")
def jump_model():
    return benchmark_jump_ou()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
