import os

import numpy as np
import pytest

os.environ.setdefault('SHOW_PROGRESS', 'false')

from database.sphere_store import SphereStore
from freeprod.components import calibrated, component_from_cyclic
from groups.models import make_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def free2():
    return make_model('free(2)')


@pytest.fixture
def z1():
    return make_model('zd(1)')


@pytest.fixture
def z2():
    return make_model('zd(2)')


@pytest.fixture
def dihedral():
    return make_model('dihedral-infinity')


@pytest.fixture
def sphere_store(tmp_path):
    return SphereStore(str(tmp_path / 'spheres'))


@pytest.fixture(scope='session')
def involution():
    """C[Z/2] với constant chính xác 1"""
    return component_from_cyclic(2).with_constant(1.0, 'exact')


@pytest.fixture(scope='session')
def cyclic3():
    return calibrated(component_from_cyclic(3), starts=5, iters=30, seed=7)
