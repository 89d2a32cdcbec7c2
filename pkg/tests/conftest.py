import time

import numpy as np
import pytest

from vaxctl.control import ControlSchedule
from vaxctl.fbsm import SolveSettings, solve
from vaxctl.integrate import integrate_forward
from vaxctl.model import DemographicInput
from vaxctl.scenario_io import get_preset


def baseline(scen):
    zero = ControlSchedule.constant(scen.grid, 0.0)
    return integrate_forward(scen.initial_state, zero, scen.params, scen.grid)


def disease_free(horizon=50.0, dt=0.1):
    scen = get_preset("case1")
    demo = DemographicInput(T_O=900_000, T_Y=4_000_000, R_O=100_000, R_Y=200_000)
    return scen.with_overrides(horizon=horizon, dt=dt, demographics=demo)


@pytest.fixture(scope="session")
def case1():
    return get_preset("case1")


@pytest.fixture(scope="session")
def case2():
    return get_preset("case2")


@pytest.fixture(scope="session")
def case1_baseline(case1):
    return baseline(case1)


@pytest.fixture(scope="session")
def case2_baseline(case2):
    return baseline(case2)


# wall-clock seconds of the shared default solves, read by the acceptance checks
TIMINGS = {}
ACCEPTANCE_LINES = []


def timed_solve(key, scen, settings=None):
    t0 = time.perf_counter()
    sol = solve(scen, settings)
    TIMINGS[key] = time.perf_counter() - t0
    return sol


@pytest.fixture(scope="session")
def case1_solution(case1):
    return timed_solve("case1", case1)


@pytest.fixture(scope="session")
def case2_solution(case2):
    return timed_solve("case2", case2)


@pytest.fixture(scope="session")
def case1_tight(case1):
    return solve(case1, SolveSettings(delta=1e-8))


@pytest.fixture(scope="session")
def case2_tight(case2):
    return solve(case2, SolveSettings(delta=1e-8))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
