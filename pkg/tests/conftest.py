from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from rcsflock.relativistic import KernelSpec, uniform_params

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def p10():
    # c = 10, gamma* = 100, D = 3, so the pressure coefficient is 0.025
    return uniform_params(10.0, kernel=KernelSpec("power_law", 2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
