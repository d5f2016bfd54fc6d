import math

import pytest
from hypothesis import HealthCheck, settings

from hslab.halfspace import GridSpec

settings.register_profile("hslab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("hslab")


def aligned_grid(n: int = 1, Nx: int = 64, L: float = 16.0, t_max: float = 2.0, K: int = 24) -> GridSpec:
    """Grid whose smallest level sits at half a cell width."""
    return GridSpec(n=n, m=1, L=L, Nx=Nx, t_min=L / Nx / 2, t_max=t_max, K=K)


@pytest.fixture
def grid1():
    return aligned_grid(1, 64)


@pytest.fixture
def grid2():
    return aligned_grid(2, 32)


@pytest.fixture
def torus1():
    return GridSpec(n=1, m=1, L=2 * math.pi, Nx=32, t_min=1e-4, t_max=1e4, K=256)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
