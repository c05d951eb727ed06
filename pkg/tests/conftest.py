import os

import pytest
from hypothesis import HealthCheck, settings

from kinklab.integrator import IntegratorConfig
from kinklab.model import make_params

settings.register_profile(
    "kinklab", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "kinklab"))


@pytest.fixture(scope="session")
def p01():
    return make_params(0.1)


@pytest.fixture(scope="session")
def p_free():
    """Integrable limit: coupling switched off."""
    return make_params(0.1, coupling_scale=0.0)


@pytest.fixture(scope="session")
def cfg12():
    return IntegratorConfig(X_max=12.0)


@pytest.fixture(scope="session")
def cfg10():
    return IntegratorConfig(X_max=10.0)


@pytest.fixture(scope="session")
def cfg8():
    return IntegratorConfig(X_max=8.0)
