import math

import numpy as np
import pytest

from vdplate import build_grid, star_shape_margin, min_observation_time
from vdplate.errors import GridError, FieldShapeError, DensityError


def test_interval(grid1d):
    assert grid1d.size == 33
    assert grid1d.h == (1/32,)
    assert grid1d.weights.sum() == pytest.approx(1.0)
    assert list(grid1d.boundary_index) == [0, 32]
    assert list(grid1d.normal_sign) == [-1.0, 1.0]
    assert list(grid1d.boundary_weights) == [1.0, 1.0]
    assert grid1d.diam == 1.0
    assert grid1d.c0 == pytest.approx(0.5)
    assert list(grid1d.along_normal(1)) == [1, 31]


def test_square(grid2d):
    assert grid2d.shape == (13, 13)
    assert grid2d.n_interior == 11*11
    assert grid2d.weights.sum() == pytest.approx(1.0)
    # corners collect both half weights, so constants integrate to the perimeter
    assert grid2d.boundary_weights.sum() == pytest.approx(4.0)
    assert grid2d.diam == pytest.approx(math.sqrt(2))
    n = grid2d.outward_normal
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)


def test_outward_normals_point_out(grid2d):
    centre = np.array([0.5, 0.5])
    outward = np.einsum('ij,ij->i', grid2d.points[grid2d.boundary_index] - centre, grid2d.outward_normal)
    assert np.all(outward > 0)


def test_star_shape_margin(grid2d):
    assert star_shape_margin(grid2d) == pytest.approx(0.5)
    assert star_shape_margin(grid2d, (0.25, 0.5)) == pytest.approx(0.25)
    with pytest.raises(GridError):
        star_shape_margin(grid2d, (1.5, 0.5))


def test_min_observation_time(grid2d, grid1d):
    assert min_observation_time(grid2d, 1.0) == pytest.approx(2*math.sqrt(2))
    assert min_observation_time(grid1d, 4.0) == pytest.approx(1.0)
    with pytest.raises(DensityError):
        min_observation_time(grid1d, 0.0)


def test_refined(grid2d):
    fine = grid2d.refined()
    assert fine.n_nodes == (25, 25)
    assert fine.h_min == pytest.approx(grid2d.h_min/2)
    assert np.allclose(fine.x0, grid2d.x0)


@pytest.mark.parametrize('args', [
    (3, [1.0], [9]),
    (1, [1.0], [4]),
    (1, [-1.0], [9]),
    (2, [1.0], [9]),
])
def test_bad_grids(args):
    with pytest.raises(GridError):
        build_grid(*args)


def test_base_point_must_be_inside():
    with pytest.raises(GridError):
        build_grid(2, [1.0, 1.0], [9, 9], x0=(0.0, 0.5))


def test_field_shape(grid2d):
    assert grid2d.field(np.zeros((13, 13))).shape == (169,)
    with pytest.raises(FieldShapeError):
        grid2d.field(np.zeros(10))


def test_inner_products(grid2d):
    one = np.ones(grid2d.size)
    assert grid2d.inner(one, one) == pytest.approx(1.0)
    assert grid2d.boundary_inner(one[grid2d.boundary_index], one[grid2d.boundary_index]) == pytest.approx(4.0)
