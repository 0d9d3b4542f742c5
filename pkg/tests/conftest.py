import numpy as np
import pytest

from nhep import models


@pytest.fixture
def skate():
    return models.SkateParams.reference()


@pytest.fixture
def rotor():
    return models.RotorParams.reference()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_zeta(rng, n=None, scale=2.0):
    """Random skate states on |Gamma| = 1 with the tilt kept off the horizontal."""
    size = 1 if n is None else n
    phi = rng.uniform(-1.4, 1.4, size)
    out = np.column_stack([rng.normal(size=(size, 3)) * scale, np.sin(phi), np.cos(phi)])
    return out[0] if n is None else out
