import math

import numpy as np
import pytest

from fieldlangevin.modes import FieldState, ModeSet


@pytest.fixture
def small_modes():
    return ModeSet.box(box_size=64.0, uv_cutoff=2.0, dimension="1+1")


@pytest.fixture
def vacuum():
    return FieldState(beta=math.inf)


@pytest.fixture
def thermal():
    return FieldState(beta=1.0)


@pytest.fixture
def times_64():
    return np.linspace(0.0, 8.0, 64)
