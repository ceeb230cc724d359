import numpy as np
import pytest

from helpers import noncommuting_pair


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qubit_pair():
    return noncommuting_pair(7)


@pytest.fixture
def qutrit_pair():
    return noncommuting_pair(11, dim=3)
