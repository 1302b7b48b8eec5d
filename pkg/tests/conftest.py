import numpy as np
import pytest

from app.services.dictionary import build_dirac_dc, build_dirac_geometric, build_gaussian


@pytest.fixture
def dirac_dc4():
    return build_dirac_dc(4)


@pytest.fixture
def dirac_dc9():
    return build_dirac_dc(9)


@pytest.fixture
def dirac_geo8():
    return build_dirac_geometric(8, 0.5)


@pytest.fixture
def gaussian_4x8():
    return build_gaussian(4, 8, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
