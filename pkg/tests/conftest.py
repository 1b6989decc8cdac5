import pytest

from impulse_lsmc.model import reference_params
from impulse_lsmc.sde import TimeGrid, simulate_reference
from impulse_lsmc.stopper import backward_induction, stopping_distribution


@pytest.fixture(scope="session")
def params():
    return reference_params()


@pytest.fixture(scope="session")
def grid():
    return TimeGrid(10, 1.0)


@pytest.fixture(scope="session")
def reference_bundle(params, grid):
    return simulate_reference(params, grid, 2 ** 16, seed=0)


@pytest.fixture(scope="session")
def reference_solution(params, reference_bundle):
    result = backward_induction(reference_bundle, params)
    return result, stopping_distribution(result, reference_bundle)
