import numpy as np
import pytest

from pointcast.diffcore import set_default_dtype


@pytest.fixture(autouse=True)
def _float64_default():
    # Tests assume 64-bit numerics unless they opt into float32 themselves.
    set_default_dtype("float64")
    yield
    set_default_dtype("float64")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
