'''
Uniform tensor grids on an interval [0,L] or an axis-aligned rectangle
[0,Lx]x[0,Ly], with the boundary geometry the multiplier estimates need:
outward normals, boundary quadrature, diam(Ω), the star-shape margin c0
about the base point x0, and the minimal observation time.

Grid functions are flat float arrays over all nodes in row-major order of
`grid.shape` (axis 0 is x).
'''

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridError, FieldShapeError, DensityError

__all__ = ['Grid', 'build_grid', 'star_shape_margin', 'min_observation_time']

MIN_NODES = 5  # two interior layers on each side for the 13-point closure


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    dimension: int
    extents: tuple
    n_nodes: tuple
    h: tuple
    x0: np.ndarray
    points: np.ndarray            # (N, dimension) node coordinates
    weights: np.ndarray           # tensor trapezoid weights, halved on the boundary
    interior_index: np.ndarray
    boundary_index: np.ndarray
    normal_axis: np.ndarray       # per boundary node
    normal_sign: np.ndarray       # -1 on the low side, +1 on the high side
    boundary_weights: np.ndarray  # dS quadrature per boundary node
    diam: float
    c0: float

    @property
    def shape(self):
        return self.n_nodes

    @property
    def size(self):
        return len(self.points)

    @property
    def n_interior(self):
        return len(self.interior_index)

    @property
    def n_boundary(self):
        return len(self.boundary_index)

    @property
    def h_min(self):
        return min(self.h)

    @cached_property
    def outward_normal(self):
        'Unit outward normal per boundary node, (n_boundary, dimension).'
        n = np.zeros((self.n_boundary, self.dimension))
        n[np.arange(self.n_boundary), self.normal_axis] = self.normal_sign
        n.setflags(write=False)
        return n

    @cached_property
    def multiplier(self):
        'm(x) = x - x0 at every node.'
        return _frozen(self.points - self.x0)

    @cached_property
    def m_dot_n(self):
        return _frozen(np.einsum('ij,ij->i', self.multiplier[self.boundary_index], self.outward_normal))

    @cached_property
    def interior_mask(self):
        mask = np.zeros(self.size, dtype=bool)
        mask[self.interior_index] = True
        mask.setflags(write=False)
        return mask

    def zeros(self):
        return np.zeros(self.size)

    def field(self, u, name='field'):
        'Return *u* as a flat float array, checking it lives on this grid.'
        a = np.asarray(u, dtype=float)
        if a.shape == tuple(self.n_nodes):
            a = a.reshape(-1)
        if a.shape != (self.size,):
            raise FieldShapeError('%s has shape %s, grid has %s nodes' % (name, np.shape(u), self.n_nodes))
        return a

    def extend(self, u_int):
        'Extend interior values by zero to all nodes.'
        u = self.zeros()
        u[self.interior_index] = u_int
        return u

    def inner(self, a, b):
        return float(np.dot(self.weights * a, b))

    def norm(self, a):
        return math.sqrt(max(self.inner(a, a), 0.0))

    def boundary_inner(self, a, b):
        return float(np.dot(self.boundary_weights * a, b))

    def along_normal(self, k):
        'Flat index of the node k steps inward from each boundary node.'
        idx = np.array(np.unravel_index(self.boundary_index, self.n_nodes))
        idx[self.normal_axis, np.arange(self.n_boundary)] -= k * self.normal_sign.astype(int)
        return np.ravel_multi_index(tuple(idx), self.n_nodes)

    def refined(self):
        'The grid with every spacing halved, same extents and x0.'
        return build_grid(self.dimension, self.extents, tuple(2*n - 1 for n in self.n_nodes), tuple(self.x0))

    def describe(self):
        return dict(dimension=self.dimension, extents=list(self.extents),
                    n_nodes=list(self.n_nodes), x0=[float(x) for x in self.x0])


def _trapezoid_1d(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = h/2
    return w


def build_grid(dimension, extents, n_nodes, x0=None):
    'Discretize the interval or rectangle [0, extents] with *n_nodes* nodes per axis.'
    if dimension not in (1, 2):
        raise GridError('dimension must be 1 or 2, got %r' % (dimension,))

    extents = tuple(float(L) for L in np.atleast_1d(extents))
    n_nodes = tuple(int(n) for n in np.atleast_1d(n_nodes))
    if len(extents) != dimension or len(n_nodes) != dimension:
        raise GridError('need %d extents and node counts, got %s and %s' % (dimension, extents, n_nodes))
    if any(L <= 0 for L in extents):
        raise GridError('extents must be positive: %s' % (extents,))
    if any(n < MIN_NODES for n in n_nodes):
        raise GridError('too few nodes %s: need at least %d per axis' % (n_nodes, MIN_NODES))

    if x0 is None:
        x0 = tuple(L/2 for L in extents)
    x0 = np.array(np.atleast_1d(x0), dtype=float)
    if x0.shape != (dimension,):
        raise GridError('x0 must have %d coordinates, got %s' % (dimension, x0))
    _check_inside(extents, x0)

    h = tuple(L/(n-1) for L, n in zip(extents, n_nodes))
    axes = [np.linspace(0.0, L, n) for L, n in zip(extents, n_nodes)]
    mesh = np.meshgrid(*axes, indexing='ij')
    points = np.stack([m.reshape(-1) for m in mesh], axis=1)

    w1d = [_trapezoid_1d(n, ha) for n, ha in zip(n_nodes, h)]
    weights = w1d[0] if dimension == 1 else np.outer(w1d[0], w1d[1]).reshape(-1)

    idx = np.indices(n_nodes).reshape(dimension, -1)
    at_low = idx == 0
    at_high = idx == np.array(n_nodes)[:, None] - 1
    on_edge = at_low | at_high
    boundary_mask = on_edge.any(axis=0)
    boundary_index = np.flatnonzero(boundary_mask)
    interior_index = np.flatnonzero(~boundary_mask)

    # corners take the normal of the first axis on which they sit at an extreme
    edge_b = on_edge[:, boundary_index]
    normal_axis = np.argmax(edge_b, axis=0)
    cols = np.arange(len(boundary_index))
    normal_sign = np.where(at_low[normal_axis, boundary_index], -1.0, 1.0)

    # each edge contributes its tangential trapezoid weight; corners collect both halves
    bw = np.zeros(len(boundary_index))
    for a in range(dimension):
        tangential = np.ones(len(boundary_index))
        for b in range(dimension):
            if b != a:
                tangential *= w1d[b][idx[b, boundary_index]]
        bw += np.where(edge_b[a], tangential, 0.0)

    bpoints = points[boundary_index]
    mn = (bpoints[cols, normal_axis] - x0[normal_axis]) * normal_sign

    return Grid(dimension=dimension,
                extents=extents,
                n_nodes=n_nodes,
                h=h,
                x0=_frozen(x0),
                points=_frozen(points),
                weights=_frozen(weights),
                interior_index=interior_index,
                boundary_index=boundary_index,
                normal_axis=normal_axis,
                normal_sign=_frozen(normal_sign),
                boundary_weights=_frozen(bw),
                diam=math.hypot(*extents),
                c0=float(mn.min()))


def _check_inside(extents, x0):
    if any(not (0 < x < L) for x, L in zip(x0, extents)):
        raise GridError('x0=%s is not strictly inside the domain %s' % (tuple(x0), extents))


def star_shape_margin(grid, x0=None):
    'min over boundary nodes of (x - x0)·n(x).'
    if x0 is None:
        return grid.c0
    x0 = np.array(np.atleast_1d(x0), dtype=float)
    _check_inside(grid.extents, x0)
    m = grid.points[grid.boundary_index] - x0
    return float(np.einsum('ij,ij->i', m, grid.outward_normal).min())


def min_observation_time(grid, rho_min):
    'T_min = 2 diam(Ω)/sqrt(rho_min); observation needs T strictly greater.'
    if not rho_min > 0:
        raise DensityError('rho_min must be positive, got %r' % (rho_min,))
    return 2*grid.diam/math.sqrt(rho_min)
