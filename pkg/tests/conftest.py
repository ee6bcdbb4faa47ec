import numpy as np
import pytest

from strongtype import spaces as sp


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def scalar():
    return sp.lp(2, 1)
