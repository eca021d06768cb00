import numpy as np
import pytest

from lab.finite import FiniteProductSpace, MatrixField, rademacher_series
from settings import get_settings

SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Settings are cached per process; every test starts from the environment."""
    monkeypatch.setenv("MCLAB_RECORD_TIMING", "false")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_space(rng):
    return FiniteProductSpace.random([2, 3, 2], rng)


@pytest.fixture
def random_field(small_space, rng):
    return MatrixField.random(small_space, 2, rng)


@pytest.fixture
def rademacher_linear():
    """f(z) = z·diag(1, −1) on one fair sign."""
    return rademacher_series(FiniteProductSpace.rademacher(1), [SIGMA_Z])
