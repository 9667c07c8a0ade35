import numpy as np
import pytest

from ridgeless_dae.models import make_neoclassical_growth
from ridgeless_dae.reference import reference_trajectory, shooting_solve

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def growth():
    return make_neoclassical_growth()


@pytest.fixture(scope="session")
def growth_shooting(growth):
    return shooting_solve(growth, T=40.0, n_eval=401)


@pytest.fixture(scope="session")
def growth_reference_40(growth):
    """Shooting benchmark on 401 points over [0, 40]."""
    return reference_trajectory(growth, np.linspace(0.0, 40.0, 401))


@pytest.fixture(scope="session")
def growth_reference_60(growth):
    """Shooting benchmark on 601 points over [0, 60] (training horizon 40 plus extrapolation)."""
    return reference_trajectory(growth, np.linspace(0.0, 60.0, 601))
