import pytest

from kickpolymer.env import EnvironmentSpec, constant_environment, sample_environment
from kickpolymer.lattice import Grid


@pytest.fixture(scope="session")
def spec():
    return EnvironmentSpec("ma-gaussian", 1.0, 1.0, 0.5, 11)


@pytest.fixture(scope="session")
def grid():
    return Grid.symmetric(12.0, 0.05)


@pytest.fixture(scope="session")
def env(spec, grid):
    return sample_environment(spec, (-10, 10), grid, 3)


@pytest.fixture(scope="session")
def zero_env(grid):
    return constant_environment(0.0, (-10, 10), grid, 0.5)
