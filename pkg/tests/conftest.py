import numpy as np
import pytest

from sgns.spectral import Basis, SpaceScale, TorusDomain


@pytest.fixture(scope="session")
def basis2d():
    """Default verification basis: d=2, K=8, s=2.5, s_U=4.5."""
    return Basis(TorusDomain(d=2, K=8), SpaceScale(d=2))


@pytest.fixture(scope="session")
def basis2d_small():
    return Basis(TorusDomain(d=2, K=3), SpaceScale(d=2))


@pytest.fixture(scope="session")
def basis3d_small():
    return Basis(TorusDomain(d=3, K=2), SpaceScale(d=3))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
