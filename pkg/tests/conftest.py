import pytest

from qgflow import (
    ForcingSpec,
    ForcingTerm,
    Grid,
    ModelParams,
    basis_mode,
)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32, 32)


@pytest.fixture(scope="session")
def demo_params(grid32):
    """nu = r = 1, beta = 0.1 on (0, pi)^2; gap condition holds comfortably."""
    return ModelParams(1.0, 1.0, 0.1, grid32)


@pytest.fixture(scope="session")
def demo_mean(grid32):
    return basis_mode(grid32, 1, 1, 0.1)


@pytest.fixture(scope="session")
def demo_spec(grid32, demo_mean):
    """Mean forcing plus one oscillating mode at unit base rate."""
    term = ForcingTerm(basis_mode(grid32, 2, 1, 0.2), omega=1.0, phase=0.0)
    return ForcingSpec(demo_mean, (term,), eta=8.0)


@pytest.fixture(scope="session")
def steady_spec(demo_mean):
    return ForcingSpec(demo_mean, (), eta=8.0)
