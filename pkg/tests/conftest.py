import numpy as np
import pytest
from hypothesis import settings

from stratlim.grid import GridSpec

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


@pytest.fixture
def heat_grid():
    return GridSpec(1, 40.0, 1024)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)
