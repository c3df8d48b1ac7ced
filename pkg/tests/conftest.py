import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from helidefect import ABC, GridSpec, sample_recipe

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def torus16():
    return GridSpec.torus(16)


@pytest.fixture(scope="session")
def abc64():
    return sample_recipe(ABC(), GridSpec.torus(64))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
