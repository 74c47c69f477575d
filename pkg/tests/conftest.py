import numpy as np
import pytest
from hypothesis import settings

from gbridge.model import ChainState, Dataset, Hyperparams

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical check")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_data(rng):
    n, p = 12, 3
    X = rng.standard_normal((n, p))
    beta = np.array([1.5, 0.0, -0.7])
    y = X @ beta + 0.5 * rng.standard_normal(n)
    return Dataset(y, X)


@pytest.fixture
def small_state(small_data, rng):
    p = small_data.p
    return ChainState(
        beta=rng.standard_normal(p),
        gamma=1.7,
        lam=rng.gamma(2.0, 1.0, size=p),
        alpha=1.3,
        kappa=np.array([0, 1, 0], dtype=np.int8),
    )


@pytest.fixture
def hyper():
    return Hyperparams()
