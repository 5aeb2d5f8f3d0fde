import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.sobolev_core import make_grid  # noqa: E402


@pytest.fixture
def grid_1d():
    return make_grid(1, 15)


@pytest.fixture
def grid_2d():
    return make_grid(2, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
