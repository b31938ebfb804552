import numpy as np
import pytest

from bowendim import MapParams
from bowendim.transfer import default_base_point


@pytest.fixture(scope="session")
def params22():
    return MapParams(2, 2.0)


@pytest.fixture(scope="session")
def base22(params22):
    return default_base_point(params22)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_disk_params(rng, ell, radius=0.95, n=1):
    """Parameters uniformly in D(ell, radius)."""
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * np.pi, n)
    return [MapParams(ell, complex(ell + rr * np.cos(tt), rr * np.sin(tt)))
            for rr, tt in zip(r, th)]
