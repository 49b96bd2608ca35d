import numpy as np
import pytest

from memvote.sim import synthetic_pore_model


@pytest.fixture(scope="session")
def model():
    return synthetic_pore_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
