import numpy as np
import pytest

from otn.bath import BathSpec, discretize
from otn.influence import CouplingBasis


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def qubit_basis():
    return CouplingBasis.from_eigenvalues([1.0, -1.0])


@pytest.fixture
def exp_bath_spec():
    """Single-exponential bath used across the oracle tests."""
    return BathSpec(kind="exponential_sum", exponentials=(((0.35 - 0.15j), (1.0 + 0.4j)),))


@pytest.fixture
def exp_bath(exp_bath_spec):
    return discretize(exp_bath_spec, 0.2, n_cut=6)
