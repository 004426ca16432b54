import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from iforge.polytope import HPolytope
from iforge.rci import LinearSystem

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True)
settings.load_profile("default")


def interval(lo, hi):
    return HPolytope.box([lo], [hi])


def scalar_system(u, w, x=1.0, a=1.0):
    """``x+ = a x + u + w`` on ``[-x, x]`` with ``|u| <= u`` and ``|w| <= w``."""
    return LinearSystem([[a]], [[1.0]], interval(-w, w), interval(-x, x), interval(-u, u))


@pytest.fixture
def holds_1d():
    # input authority beats the disturbance: X itself is invariant
    return scalar_system(0.2, 0.1)


@pytest.fixture
def shrinks_1d():
    return scalar_system(0.1, 0.2)


@pytest.fixture
def double_integrator():
    return LinearSystem(
        [[1.0, 1.0], [0.0, 1.0]], [[0.0], [1.0]],
        HPolytope.box([-0.1, -0.1], [0.1, 0.1]),
        HPolytope.box([-5.0, -5.0], [5.0, 5.0]),
        HPolytope.box([-1.0], [1.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
