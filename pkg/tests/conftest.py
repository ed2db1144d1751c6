import numpy as np
import pytest

from acmax.geometries import flat_torus, twisted_torus, warped_torus
from acmax.verify import random_trig_field


@pytest.fixture(scope="session")
def flat1():
    return flat_torus(1, 32)


@pytest.fixture(scope="session")
def flat2():
    return flat_torus(2, 12)


@pytest.fixture(scope="session")
def twisted():
    return twisted_torus(2, 12, 0.3)


@pytest.fixture(scope="session")
def warped():
    return warped_torus(2, 12, 0.3, 0.2)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def smooth_field(geom, seed=0, amp=1.0, kmax=2, nmodes=4):
    return random_trig_field(geom.grid, np.random.default_rng(seed),
                             kmax=kmax, nmodes=nmodes, amp=amp)
