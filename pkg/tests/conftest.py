import numpy as np
import pytest

from hyperns.stokes import make_context


@pytest.fixture(scope="session")
def ctx16():
    return make_context(16)


@pytest.fixture(scope="session")
def ctx32():
    return make_context(32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
