import numpy as np
import pytest

from mfbd import AffineMeanField, Distribution, LogisticMeanField, rate_model


@pytest.fixture
def affine():
    return AffineMeanField(1.0, 0.5, 1.0)


@pytest.fixture
def logistic():
    return LogisticMeanField(1.5, 0.5, 2.0, 0.5, 0.2)


@pytest.fixture
def pure_birth_death():
    """b = 2, a(i) = i: no measure dependence, stationary law Poisson(2)."""
    return rate_model(lambda t, i, mu: float(i), lambda t, i, mu: 2.0,
                      vectorized=False, name="bd(2, i)")


@pytest.fixture
def zero_rates():
    return rate_model(lambda t, i, mu: 0.0, lambda t, i, mu: 0.0, name="zero")


def random_distribution(rng, cap=12):
    m = rng.random(cap + 1) ** 2
    m /= m.sum()
    return Distribution(m)


def spaced_checkpoint_states(path, times):
    return np.array([path.state_at(t) for t in times])
