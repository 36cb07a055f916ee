import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eikonal_entropy.entropy import phi_from_psi, trig

settings.register_profile("pkg", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")


@pytest.fixture(scope="session")
def cos2():
    return phi_from_psi(trig(cos={2: 1.0}), "cos2s")


@pytest.fixture(scope="session")
def sin2():
    return phi_from_psi(trig(sin={2: 1.0}), "sin2s")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
