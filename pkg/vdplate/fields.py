'''
Density fields ρ = ρ0 + (ρ1 − ρ0)·1_ω and admissible initial data (f, g).
'''

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg

from visidata import vd

from .errors import DensityError, InitialDataError

__all__ = ['Inclusion', 'ParametricDensity', 'DensityField', 'InitialData',
           'AdmissibilityReport', 'make_density', 'uniform_density',
           'make_initial_data', 'check_admissible', 'require_admissible',
           'clamped_slope_excess', 'normal_constraint', 'project_clamped',
           'INITIAL_FAMILIES']

INITIAL_FAMILIES = ('eigenmode', 'modes', 'bump', 'random', 'zero')


@dataclass(frozen=True)
class Inclusion:
    'Disk (2D) or subinterval (1D) |x − center| ≤ radius; radius 0 is empty.'
    center: tuple
    radius: float

    @classmethod
    def from_spec(cls, spec):
        if spec is None or isinstance(spec, Inclusion):
            return spec
        if 'interval' in spec:
            a, b = spec['interval']
            return cls(center=((a+b)/2,), radius=(b-a)/2)
        return cls(center=tuple(float(c) for c in np.atleast_1d(spec['center'])),
                   radius=float(spec['radius']))

    def mask(self, grid):
        if self.radius <= 0:
            return np.zeros(grid.size, dtype=bool)
        d = np.linalg.norm(grid.points - np.asarray(self.center), axis=1)
        return d <= self.radius*(1 + 1e-12)

    def describe(self):
        return dict(center=list(self.center), radius=self.radius)


@dataclass(frozen=True)
class ParametricDensity:
    rho0: float
    rho1: float
    inclusion: Optional[Inclusion]


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: object
    values: np.ndarray
    rho_min: float
    rho_max: float
    parametric: Optional[ParametricDensity] = None

    @classmethod
    def from_values(cls, grid, values):
        'Wrap a nodal array as-is; bounds are read off the values and nothing is validated.'
        values = grid.field(values, 'rho')
        return cls(grid=grid, values=values, rho_min=float(values.min()), rho_max=float(values.max()))

    @property
    def inclusion_mask(self):
        if self.parametric is None or self.parametric.inclusion is None:
            return np.zeros(self.grid.size, dtype=bool)
        return self.parametric.inclusion.mask(self.grid)

    def with_rho1(self, rho1):
        'The same inclusion geometry with a different inclusion density.'
        if self.parametric is None:
            raise DensityError('density has no parametric form to vary')
        p = self.parametric
        return make_density(self.grid, p.rho0, rho1, p.inclusion)

    def diff_inf(self, other):
        return float(np.max(np.abs(self.values - other.values)))

    def describe(self):
        d = dict(rho_min=self.rho_min, rho_max=self.rho_max)
        if self.parametric:
            p = self.parametric
            d.update(rho0=p.rho0, rho1=p.rho1,
                     inclusion=p.inclusion.describe() if p.inclusion else None)
        return d


def make_density(grid, rho0, rho1=None, inclusion=None):
    'Piecewise-constant density, rho1 on inclusion nodes and rho0 elsewhere.'
    if rho1 is None:
        rho1 = rho0
    rho0, rho1 = float(rho0), float(rho1)
    if not (rho0 > 0 and rho1 > 0):
        raise DensityError('densities must be positive, got rho0=%g rho1=%g' % (rho0, rho1))

    inclusion = Inclusion.from_spec(inclusion)
    if inclusion is not None:
        c = np.asarray(inclusion.center, dtype=float)
        if c.shape != (grid.dimension,):
            raise DensityError('inclusion center %s does not match dimension %d' % (tuple(c), grid.dimension))
        if inclusion.radius < 0:
            raise DensityError('inclusion radius must be nonnegative, got %g' % inclusion.radius)
        L = np.array(grid.extents)
        if np.any(c - inclusion.radius < 0) or np.any(c + inclusion.radius > L):
            raise DensityError('inclusion at %s radius %g escapes the domain %s' % (tuple(c), inclusion.radius, grid.extents))

    values = np.full(grid.size, rho0)
    if inclusion is not None:
        values[inclusion.mask(grid)] = rho1
    values.setflags(write=False)
    return DensityField(grid=grid, values=values,
                        rho_min=min(rho0, rho1), rho_max=max(rho0, rho1),
                        parametric=ParametricDensity(rho0, rho1, inclusion))


def uniform_density(grid, rho=1.0):
    return make_density(grid, rho)


@dataclass(frozen=True, eq=False)
class InitialData:
    f: np.ndarray
    g: np.ndarray
    description: str = ''
    family: str = ''
    compatible: bool = False        # Δ²f|∂Ω = 0 is claimed and will be checked
    params: dict = field(default_factory=dict)

    def scaled(self, alpha):
        return replace(self, f=alpha*self.f, g=alpha*self.g, description='%g*(%s)' % (alpha, self.description))

    def __sub__(self, other):
        return InitialData(f=self.f - other.f, g=self.g - other.g,
                           description='(%s)-(%s)' % (self.description, other.description),
                           family='difference',
                           compatible=self.compatible and other.compatible)


def normal_constraint(op):
    '''Sparse rows C with (C u)[i] the outward one-sided du/dn at boundary node i.

    Rows whose stencil only touches boundary nodes (corners) are dropped.'''
    g = op.grid
    coeff = np.array([48, -36, 16, -3]) / (12*op.h_normal)[:, None]
    cols = np.stack([g.along_normal(k) for k in range(1, 5)], axis=1)
    inside = g.interior_mask[cols]
    keep = inside.any(axis=1)
    rows = np.repeat(np.arange(keep.sum()), 4)
    data = -(coeff*inside)[keep].reshape(-1)
    return sps.csr_matrix((data, (rows, cols[keep].reshape(-1))), shape=(keep.sum(), g.size))


def project_clamped(op, u):
    'Zero the boundary values of *u* and remove its discrete normal derivative by least-change projection.'
    g = op.grid
    u = g.field(u).copy()
    u[g.boundary_index] = 0
    C = normal_constraint(op)
    r = C @ u
    if not np.any(r):
        return u
    Cd = C.toarray()
    y = scipy.linalg.solve(Cd @ Cd.T, r, assume_a='pos')
    return u - Cd.T @ y


def _bump(grid, support):
    f = np.ones(grid.size)
    for a, (lo, hi) in enumerate(support):
        x = grid.points[:, a]
        f *= np.where((x > lo) & (x < hi), (x - lo)**2 * (hi - x)**2, 0.0)
    return f


def _smoothed_noise(op, rng):
    noise = rng.standard_normal(op.n_interior)
    w = scipy.sparse.linalg.splu(op.B).solve(noise)
    return project_clamped(op, op.grid.extend(w))


def _mode_sum(op, rho, coefficients, eigenpairs):
    coefficients = [float(c) for c in coefficients]
    if eigenpairs is None or len(eigenpairs) < len(coefficients):
        from .biharmonic import spectrum
        eigenpairs = spectrum(op, rho, len(coefficients))
    u = op.grid.zeros()
    for c, (_, phi) in zip(coefficients, eigenpairs):
        u += c*phi
    return u


def make_initial_data(op, family, rho=None, eigenpairs=None, **params):
    '''Build admissible initial data from one of INITIAL_FAMILIES.

    - eigenmode: k (1-based), amplitude, normalize ('mass' for ‖√ρφ‖ = 1, 'energy' for ‖Δφ‖ = 1), slot ('f' or 'g')
    - modes: f_coefficients, g_coefficients over the lowest eigenmodes
    - bump: amplitude, velocity (g = velocity·shape), support [(lo, hi), ...] per axis
    - random: seed, amplitude, velocity
    - zero
    '''
    grid = op.grid
    if family not in INITIAL_FAMILIES:
        raise InitialDataError('unknown initial-data family %r; choose from %s' % (family, ', '.join(INITIAL_FAMILIES)))
    if rho is None:
        rho = uniform_density(grid)

    zero = grid.zeros()
    if family == 'zero':
        return InitialData(f=zero, g=grid.zeros(), description='zero', family=family, compatible=True)

    if family == 'eigenmode':
        k = int(params.get('k', 1))
        amplitude = float(params.get('amplitude', 1.0))
        slot = params.get('slot', 'f')
        if k < 1 or k > grid.n_interior:
            raise InitialDataError('eigenmode index %d outside 1..%d' % (k, grid.n_interior))
        if slot not in ('f', 'g'):
            raise InitialDataError('eigenmode slot must be f or g, got %r' % (slot,))
        if eigenpairs is None or len(eigenpairs) < k:
            from .biharmonic import spectrum
            eigenpairs = spectrum(op, rho, k)
        lam, phi = eigenpairs[k-1]
        if params.get('normalize', 'mass') == 'energy':
            phi = phi / grid.norm(op.lap(phi))
        u = amplitude*phi
        f, g = (u, zero) if slot == 'f' else (zero, u)
        return InitialData(f=f, g=g, description='eigenmode k=%d %s=%g' % (k, slot, amplitude),
                           family=family, compatible=True, params=dict(k=k, amplitude=amplitude, slot=slot, lam=lam))

    if family == 'modes':
        fc = params.get('f_coefficients') or params.get('coefficients') or []
        gc = params.get('g_coefficients') or []
        if not fc and not gc:
            raise InitialDataError('modes family needs f_coefficients or g_coefficients')
        if max(len(fc), len(gc)) > grid.n_interior:
            raise InitialDataError('%d coefficients for %d interior nodes' % (max(len(fc), len(gc)), grid.n_interior))
        f = _mode_sum(op, rho, fc, eigenpairs) if fc else zero
        g = _mode_sum(op, rho, gc, eigenpairs) if gc else grid.zeros()
        return InitialData(f=f, g=g, description='modes f=%s g=%s' % (list(fc), list(gc)),
                           family=family, compatible=True, params=dict(f_coefficients=list(fc), g_coefficients=list(gc)))

    if family == 'bump':
        amplitude = float(params.get('amplitude', 1.0))
        velocity = float(params.get('velocity', 0.0))
        support = params.get('support') or [(0.0, L) for L in grid.extents]
        support = [tuple(float(x) for x in s) for s in support]
        if len(support) != grid.dimension:
            raise InitialDataError('bump support needs %d intervals, got %d' % (grid.dimension, len(support)))
        for (lo, hi), L in zip(support, grid.extents):
            if not 0 <= lo < hi <= L:
                raise InitialDataError('bump support (%g, %g) not inside [0, %g]' % (lo, hi, L))
        shape = _bump(grid, support)
        return InitialData(f=amplitude*shape, g=velocity*shape,
                           description='bump amplitude=%g velocity=%g' % (amplitude, velocity),
                           family=family, params=dict(amplitude=amplitude, velocity=velocity, support=support))

    # random
    seed = int(params.get('seed', 0))
    amplitude = float(params.get('amplitude', 1.0))
    velocity = float(params.get('velocity', 1.0))
    rng = np.random.default_rng(seed)
    f = _smoothed_noise(op, rng)
    g = _smoothed_noise(op, rng)
    f *= amplitude / max(np.abs(f).max(), 1e-300)
    g *= velocity / max(np.abs(g).max(), 1e-300)
    return InitialData(f=f, g=g, description='random seed=%d' % seed, family=family,
                       params=dict(seed=seed, amplitude=amplitude, velocity=velocity))


CLOSURE_BAND = 3.0


def clamped_slope_excess(op, f):
    '''|df/dn| at boundary nodes beyond the slope the mirror closure leaves.

    With the ghost u[-1] = u[1] the centered difference through the wall is
    zero, so a smooth function the clamped operator produces has a one-sided
    slope of about h²/6 d³f/ds³ there.  Slopes up to CLOSURE_BAND times that
    are not counted; a continuum slope such as that of x(1−x) always is.'''
    from .biharmonic import normal_derivative, normal_third_derivative
    dn = np.abs(normal_derivative(op, f))
    band = CLOSURE_BAND*op.h_normal**2*np.abs(normal_third_derivative(op, f))/6
    return np.maximum(dn - band, 0.0)


@dataclass
class AdmissibilityReport:
    ok: bool
    violations: list
    warnings: list = field(default_factory=list)    # compatibility defects, reported only

    def __bool__(self):
        return self.ok


def check_admissible(op, rho, data, tol=None):
    'Check density bounds and the clamped boundary conditions of (f, g) relative to each field.'
    if tol is None:
        tol = vd.options.plate_admissible_tol
    grid = op.grid
    values = grid.field(rho.values, 'rho')
    f = grid.field(data.f, 'f')
    g = grid.field(data.g, 'g')
    b = grid.boundary_index
    violations = []
    warnings = []

    if np.any(values <= 0):
        violations.append('positivity: %d nodes with rho <= 0' % int(np.sum(values <= 0)))
    elif values.min() < rho.rho_min*(1 - 1e-12) or values.max() > rho.rho_max*(1 + 1e-12):
        violations.append('density bounds: values in [%g, %g] outside [%g, %g]'
                          % (values.min(), values.max(), rho.rho_min, rho.rho_max))

    fmax = np.abs(f).max()
    if np.abs(f[b]).max() > tol*fmax:
        violations.append('boundary value of f: max |f| = %.3g on the boundary' % np.abs(f[b]).max())

    slope = clamped_slope_excess(op, f)
    dn = (slope*op.normal_extent).max()
    if dn > tol*fmax:
        violations.append('normal derivative of f: max |df/dn|·L = %.3g exceeds %.3g' % (dn, tol*fmax))

    gmax = np.abs(g).max()
    if np.abs(g[b]).max() > tol*gmax:
        violations.append('boundary value of g: max |g| = %.3g on the boundary' % np.abs(g[b]).max())

    if data.compatible:
        Bf = op.bilap(f)
        extrapolated = 3*Bf[grid.along_normal(1)] - 3*Bf[grid.along_normal(2)] + Bf[grid.along_normal(3)]
        scale = np.abs(Bf).max()
        if np.abs(extrapolated).max() > tol*scale:
            warnings.append('compatibility: boundary bilaplacian of f is %.3g of its maximum'
                            % (np.abs(extrapolated).max()/scale))

    return AdmissibilityReport(ok=not violations, violations=violations, warnings=warnings)


def require_admissible(op, rho, data):
    'Raise InitialDataError on inadmissible data; compatibility defects come back as warnings.'
    report = check_admissible(op, rho, data)
    if not report.ok:
        raise InitialDataError('initial data %s not admissible: %s' % (data.description, '; '.join(report.violations)))
    warnings = ['%s: %s' % (data.description, msg) for msg in report.warnings]
    for msg in warnings:
        vd.warning(msg)
    return warnings
