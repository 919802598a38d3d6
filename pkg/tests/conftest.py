import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_grid(rng, h, w):
    return rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
