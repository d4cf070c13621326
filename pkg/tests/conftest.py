import numpy as np
import pytest

from conewave.grid import GridSpec, build_grid
from conewave.variational import make_model, well_constants
from oracles import dense_laplacian


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(GridSpec(3, 8, 4, -4.0))


@pytest.fixture(scope="session")
def default_grid():
    return build_grid(GridSpec(3, 32, 8, -4.0))


@pytest.fixture(scope="session")
def small_dense(small_grid):
    return dense_laplacian(small_grid)


@pytest.fixture(scope="session")
def default_model(default_grid):
    return make_model(default_grid, 3.0, 2.0)


@pytest.fixture(scope="session")
def default_constants(default_model):
    return well_constants(default_model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def quartic_model(default_grid):
    # p = 4 sits above the critical range on n = 3; the high-energy theory does not need it
    return make_model(default_grid, 4.0, 2.0, enforce_hp=False)


@pytest.fixture(scope="session")
def quartic_constants(quartic_model):
    return well_constants(quartic_model, restarts=40)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[num])
