import math

import numpy as np
import pytest
from hypothesis import settings

from jsgraph.domain import scherk_quadrilateral
from jsgraph.metric import euclidean_r3, hyperbolic_h2xr
from jsgraph.solver import CapSchedule, solve_jenkins_serrin

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

B_SCHERK = math.log(2.0)
R_STAR = math.asin(1.0 / 3.0)


@pytest.fixture(scope="session")
def r3():
    return euclidean_r3(1.0)


@pytest.fixture(scope="session")
def h2():
    return hyperbolic_h2xr(1.0)


@pytest.fixture(scope="session")
def scherk(r3):
    return scherk_quadrilateral(r3, 0.0, B_SCHERK, 0.3, -0.3)


@pytest.fixture(scope="session")
def scherk_divergent(r3):
    return scherk_quadrilateral(r3, 0.0, B_SCHERK, 0.45, -0.45)


@pytest.fixture(scope="session")
def scherk_run(r3, scherk):
    """Convergent run used by the flux checks: h = 0.02, caps 2..16."""
    return solve_jenkins_serrin(r3, scherk, CapSchedule((2, 4, 8, 16)), h_target=0.02)


@pytest.fixture(scope="session")
def scherk_run_coarse(r3, scherk):
    return solve_jenkins_serrin(r3, scherk, CapSchedule((2, 4, 8)), h_target=0.05)


@pytest.fixture(scope="session")
def divergent_runs(r3, scherk_divergent):
    return {
        h: solve_jenkins_serrin(r3, scherk_divergent, CapSchedule((2, 4, 8, 16)), h_target=h)
        for h in (0.04, 0.02)
    }


def reaper_t(x, a=0.0):
    return a - np.log(np.cos(x))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
