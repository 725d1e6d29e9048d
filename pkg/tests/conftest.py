import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from moyal_lab.plane import Boundary, GridSpec, PlaneContext, make_theta

settings.register_profile(
    "lab", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.function_scoped_fixture]
)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def torus16():
    return PlaneContext.build(2, 16, 8.0)


@pytest.fixture(scope="session")
def torus32():
    return PlaneContext.build(2, 32, 16.0)


@pytest.fixture(scope="session")
def box16():
    theta = make_theta(2, 1.0)
    return GridSpec(2, 16, 8.0, Boundary.OPEN_BOX), theta


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance results, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
