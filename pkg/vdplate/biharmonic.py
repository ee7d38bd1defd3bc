'''
Discrete clamped-plate operators.

The Laplacian L is the 3-point (1D) / 5-point (2D) stencil evaluated at
every node, with ghost values mirrored across the boundary (u[-1] = u[1]),
which is the second-order encoding of du/dn = 0.  The bilaplacian on the
interior is L∘L with that closure; it equals W_int^-1 Lᵀ W L, so
<Δ²u, v>_h = <Δu, Δv>_h holds to round-off for every clamped pair.
'''

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.linalg
import scipy.optimize

from visidata import vd

from .errors import SpectrumError

__all__ = ['ClampedOperator', 'EnergyValue', 'laplacian', 'bilaplacian',
           'boundary_traces', 'normal_derivative', 'normal_third_derivative',
           'h4_norm', 'energy',
           'dissipativity', 'norm_equivalence_bounds', 'spectrum',
           'clamped_beam_eigenvalue']


def _second_difference(n, h):
    'Reflected second difference on n nodes: the mirror ghost doubles the inward neighbour.'
    main = np.full(n, -2.0)
    upper = np.ones(n-1)
    lower = np.ones(n-1)
    upper[0] = 2.0
    lower[-1] = 2.0
    return sps.diags([lower, main, upper], [-1, 0, 1], format='csr') / h**2


class ClampedOperator:
    'Assembled Laplacian and clamped bilaplacian for one grid.  Immutable once built.'
    def __init__(self, grid):
        self.grid = grid
        blocks = [_second_difference(n, h) for n, h in zip(grid.n_nodes, grid.h)]
        if grid.dimension == 1:
            L = blocks[0]
        else:
            Ix = sps.identity(grid.n_nodes[0], format='csr')
            Iy = sps.identity(grid.n_nodes[1], format='csr')
            L = sps.kron(blocks[0], Iy) + sps.kron(Ix, blocks[1])
        self.L = sps.csr_matrix(L)                          # all nodes -> all nodes
        self.L_int = sps.csc_matrix(self.L[:, grid.interior_index])   # interior values -> all nodes

        w_int = grid.weights[grid.interior_index][0]
        W = sps.diags(grid.weights)
        B = (self.L_int.T @ W @ self.L_int) / w_int
        self.B = sps.csc_matrix(0.5*(B + B.T))              # interior -> interior, symmetric
        self.B.sort_indices()

        self._trace_rows = [grid.along_normal(k) for k in (1, 2, 3)]
        self.h_normal = np.array(grid.h)[grid.normal_axis]
        self.normal_extent = np.array(grid.extents)[grid.normal_axis]

    @property
    def n_interior(self):
        return self.grid.n_interior

    def lap(self, u):
        return self.L @ u

    def bilap_interior(self, u):
        'Δ²_h u on interior nodes, for u clamped (boundary values ignored).'
        return self.B @ u[self.grid.interior_index]

    def bilap(self, u):
        return self.grid.extend(self.bilap_interior(u))


def laplacian(op, u):
    'Δ_h u at every node; boundary nodes use the mirrored ghost values.'
    return op.lap(op.grid.field(u, 'u'))


def bilaplacian(op, u):
    'Δ²_h u = L(L u) on interior nodes with the clamped closure, zero on the boundary.'
    return op.bilap(op.grid.field(u, 'u'))


def boundary_traces(op, u):
    '''Return (trace_lap, trace_nlap) on the boundary nodes.

    u = a s² + b s³ + c s⁴ is fitted along the inward normal s through the
    three nearest interior layers (u = du/dn = 0 at the wall).  Tangential
    terms vanish on a clamped wall, so Δu = 2a and the outward ∂nΔu = −6b,
    of second order in h.'''
    u = op.grid.field(u, 'u')
    r1, r2, r3 = op._trace_rows
    h = op.h_normal
    trace_lap = (108*u[r1] - 27*u[r2] + 4*u[r3]) / (18*h*h)
    trace_nlap = (15*u[r1] - 6*u[r2] + u[r3]) / h**3
    return trace_lap, trace_nlap


def _normal_rows(op, u):
    g = op.grid
    return [u[g.boundary_index]] + [u[g.along_normal(k)] for k in range(1, 5)]


def normal_derivative(op, u):
    'Outward du/dn at boundary nodes, one-sided and exact for quartics along the normal.'
    u0, u1, u2, u3, u4 = _normal_rows(op, op.grid.field(u, 'u'))
    inward = (-25*u0 + 48*u1 - 36*u2 + 16*u3 - 3*u4) / (12*op.h_normal)
    return -inward


def normal_third_derivative(op, u):
    'Inward d³u/ds³ at boundary nodes, one-sided and exact for quartics along the normal.'
    u0, u1, u2, u3, u4 = _normal_rows(op, op.grid.field(u, 'u'))
    return (-5*u0 + 18*u1 - 24*u2 + 14*u3 - 3*u4) / (2*op.h_normal**3)


def h4_norm(op, u):
    'Discrete H⁴ proxy (‖u‖² + ‖Δ_h u‖² + ‖Δ²_h u‖²)^½.'
    g = op.grid
    u = g.field(u, 'u')
    Lu = op.lap(u)
    Bu = op.bilap(u)
    return math.sqrt(g.inner(u, u) + g.inner(Lu, Lu) + g.inner(Bu, Bu))


@dataclass(frozen=True)
class EnergyValue:
    kinetic: float
    bending: float
    H_norm_sq: float        # ‖Δ²u‖² + ‖√ρ v‖², the graph form of the state-space norm

    @property
    def E(self):
        return self.kinetic + self.bending

    @property
    def energy_norm_sq(self):
        '‖Δu‖² + ‖√ρ v‖² = 2E, the norm in which A is dissipative.'
        return 2*self.E


def energy(op, rho, state):
    'E = ½∫ρ|v|² + ½∫|Δu|² by trapezoid quadrature, plus the graph-form H norm.'
    g = op.grid
    u = g.field(state.u, 'u')
    v = g.field(state.v, 'v')
    rv = rho.values * v
    Lu = op.lap(u)
    Bu = op.bilap(u)
    kinetic = 0.5*g.inner(rv, v)
    return EnergyValue(kinetic=kinetic,
                       bending=0.5*g.inner(Lu, Lu),
                       H_norm_sq=g.inner(Bu, Bu) + 2*kinetic)


def dissipativity(op, rho, gamma, u, v):
    '''Return (Re<A(u,v),(u,v)>_E, -γ∫|v|²) for the discrete system operator.

    A(u,v) = (v, -ρ⁻¹(Δ²u + γv)); the two numbers agree to round-off.'''
    g = op.grid
    u = g.field(u, 'u')
    v = g.field(v, 'v')
    Au = v
    Av = -(op.bilap(u) + gamma*v) / rho.values
    lhs = g.inner(op.lap(Au), op.lap(u)) + g.inner(rho.values*Av, v)
    return lhs, -gamma*g.inner(v, v)


def norm_equivalence_bounds(op, rho, ensemble=None, count=10, seed=0):
    '''Empirical C1, C2 with C1(‖f‖²_H4 + ‖g‖²) ≤ ‖(f,g)‖²_H ≤ C2(...) over an ensemble.

    *ensemble* is a list of InitialData; when omitted, *count* seeded random
    admissible members are drawn.'''
    from .errors import EnsembleError
    from .fields import make_initial_data

    if ensemble is None:
        if count < 10:
            raise EnsembleError('need at least 10 random members, got %d' % count)
        ensemble = [make_initial_data(op, 'random', seed=seed+i) for i in range(count)]
    if not ensemble:
        raise EnsembleError('empty ensemble')

    g = op.grid
    ratios = []
    for data in ensemble:
        Bf = op.bilap(data.f)
        H = g.inner(Bf, Bf) + g.inner(rho.values*data.g, data.g)
        product = h4_norm(op, data.f)**2 + g.inner(data.g, data.g)
        if product > 0:
            ratios.append(H/product)
    if not ratios:
        raise EnsembleError('every ensemble member is zero')
    return min(ratios), max(ratios)


def spectrum(op, rho, k):
    '''Lowest *k* eigenpairs of Δ²_h φ = λ ρ φ on the interior, ascending.

    Eigenvectors are returned on all nodes, normalized so that ‖√ρ φ‖ = 1.'''
    g = op.grid
    n = g.n_interior
    if n > vd.options.plate_dense_max:
        raise SpectrumError('interior dimension %d exceeds plate_dense_max=%d' % (n, vd.options.plate_dense_max))
    if not 1 <= k <= n:
        raise SpectrumError('asked for %d eigenpairs of a %d-dimensional problem' % (k, n))

    M = rho.values[g.interior_index]
    lam, vecs = scipy.linalg.eigh(op.B.toarray(), np.diag(M), subset_by_index=[0, k-1])
    w_int = g.weights[g.interior_index][0]
    pairs = []
    for j in range(k):
        phi = g.extend(vecs[:, j] / math.sqrt(w_int))
        # fix the sign so the largest excursion is positive
        if phi[np.argmax(np.abs(phi))] < 0:
            phi = -phi
        pairs.append((float(lam[j]), phi))
    return pairs


def clamped_beam_eigenvalue(k=1, length=1.0, rho=1.0):
    'Continuum λ_k of u⁗ = λρu on a clamped beam, from bisection of cos μ cosh μ = 1.'
    f = lambda mu: math.cos(mu)*math.cosh(mu) - 1
    centre = (k + 0.5)*math.pi
    mu = scipy.optimize.bisect(f, centre - 0.25, centre + 0.25, xtol=1e-14)
    return mu**4 / (rho * length**4)
