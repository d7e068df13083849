import pytest

from utils.cavity_solver import CavityConfig, find_connection, solve_cavity
from utils.inner_limit import solve_inner
from utils.stored_energy import ScalarModel, StoredEnergy, reference_energy


@pytest.fixture(scope="session")
def energy():
    """g(x) = x^2/2, h(x) = (x - 1) ln x, d = 3."""
    return reference_energy(3)


@pytest.fixture(scope="session")
def energy_d2():
    """g(x) = 1/(x + 1), h(x) = (x - 1) ln x, d = 2."""
    return StoredEnergy(ScalarModel.inverse_power_sum([(1.0, 1.0, 1.0)]), ScalarModel.log_entropy(1.0), 2)


@pytest.fixture(scope="session")
def trajectory(energy):
    return solve_cavity(CavityConfig(E=energy, phi0=1.0))


@pytest.fixture(scope="session")
def connection(trajectory):
    return find_connection(trajectory)


@pytest.fixture(scope="session")
def inner_solution(energy):
    return solve_inner(energy, energy.H)
