import pytest

from visidata import vd

import vdplate
from vdplate import (build_grid, ClampedOperator, uniform_density, spectrum,
                     make_initial_data)
from vdplate.settings import PLATE_OPTIONS


@pytest.fixture
def options():
    'vd.options, restored after the test.'
    saved = {k: getattr(vd.options, k) for k in PLATE_OPTIONS}
    yield vd.options
    for k, v in saved.items():
        setattr(vd.options, k, v)


@pytest.fixture(scope='session')
def grid1d():
    return build_grid(1, [1.0], [33])


@pytest.fixture(scope='session')
def op1d(grid1d):
    return ClampedOperator(grid1d)


@pytest.fixture(scope='session')
def rho1d(grid1d):
    return uniform_density(grid1d)


@pytest.fixture(scope='session')
def modes1d(op1d, rho1d):
    return spectrum(op1d, rho1d, 4)


@pytest.fixture(scope='session')
def grid2d():
    return build_grid(2, [1.0, 1.0], [13, 13])


@pytest.fixture(scope='session')
def op2d(grid2d):
    return ClampedOperator(grid2d)


@pytest.fixture(scope='session')
def rho2d(grid2d):
    return uniform_density(grid2d)


@pytest.fixture(scope='session')
def mode1(op1d, rho1d, modes1d):
    return make_initial_data(op1d, 'eigenmode', rho=rho1d, eigenpairs=modes1d, k=1)
