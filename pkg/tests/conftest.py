import os

import pytest
from hypothesis import HealthCheck, settings

from normdiff.model import PayoffMatrix

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def pay32():
    return PayoffMatrix(3, 2, 0, 0)


@pytest.fixture
def pay21():
    return PayoffMatrix(2, 1, 0, 0)
