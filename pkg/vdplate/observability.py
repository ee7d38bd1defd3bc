'''
Observation functional J, empirical observability constants
E(0)/((1+γ)J), and the multiplier integrals with m(x) = x − x0.
'''

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from visidata import vd, Progress

from .biharmonic import energy, boundary_traces
from .errors import EnsembleError, TimeStepError
from .evolution import State, simulate, time_integral
from .grid import min_observation_time

__all__ = ['boundary_functional', 'ObservabilityReport', 'observability_ratio',
           'ConstantEstimate', 'estimate_constant', 'gamma_scan',
           'MultiplierDiagnostics', 'multiplier_diagnostics', 'multiplier_field']


def boundary_functional(record):
    '∫₀ᵀ∫∂Ω (|∂nΔu|² + |Δu|²) dS dt, trapezoid in time.'
    return record.functional()


@dataclass(eq=False)
class ObservabilityReport:
    E0: float
    J: float
    gamma: float
    T: float
    ratio: float
    T_min: float
    time_condition_met: bool
    description: str = ''
    warnings: list = field(default_factory=list)
    result: Optional[object] = None        # SimulationResult, kept for drill-down

    def as_dict(self):
        return dict(description=self.description, gamma=self.gamma, T=self.T, E0=self.E0, J=self.J,
                    ratio=self.ratio, T_min=self.T_min, time_condition_met=self.time_condition_met)


def _time_warning(grid, rho, T, warnings):
    T_min = min_observation_time(grid, rho.rho_min)
    met = T > T_min
    if not met:
        msg = 'T=%g does not exceed the minimal observation time %g' % (T, T_min)
        vd.warning(msg)
        warnings.append(msg)
    return T_min, met


def observability_ratio(op, rho, gamma, data, T, dt=None):
    'Simulate (f, g) and report E(0)/((1+γ)J).'
    warnings = []
    T_min, met = _time_warning(op.grid, rho, T, warnings)
    result = simulate(op, rho, gamma, data, T, dt)
    warnings.extend(result.warnings)
    E0 = energy(op, rho, State.initial(data)).E
    J = boundary_functional(result.record)
    if E0 == 0:
        ratio = 0.0
    elif J == 0:
        ratio = float('inf')
        msg = '%s: positive energy with vanishing boundary observation' % data.description
        vd.warning(msg)
        warnings.append(msg)
    else:
        ratio = E0/((1 + gamma)*J)
    return ObservabilityReport(E0=E0, J=J, gamma=gamma, T=T, ratio=ratio, T_min=T_min,
                               time_condition_met=met, description=data.description,
                               warnings=warnings, result=result)


@dataclass(eq=False)
class ConstantEstimate:
    gamma: float
    T: float
    C_obs: float
    per_datum: list           # ObservabilityReport per ensemble member

    @property
    def warnings(self):
        return [w for r in self.per_datum for w in r.warnings]


def estimate_constant(op, rho, gamma, ensemble, T, dt=None):
    'C_obs = max of E0/((1+γ)J) over ensemble members with E0 > 0.'
    if not ensemble:
        raise EnsembleError('empty ensemble')
    with ThreadPoolExecutor(max_workers=vd.options.plate_threads) as executor:
        reports = list(executor.map(lambda d: observability_ratio(op, rho, gamma, d, T, dt),
                                    Progress(ensemble, gerund='observing')))
    live = [r.ratio for r in reports if r.E0 > 0]
    if not live:
        raise EnsembleError('every ensemble member has zero initial energy')
    return ConstantEstimate(gamma=gamma, T=T, C_obs=max(live), per_datum=reports)


def gamma_scan(op, rho, gammas, ensemble, T, dt=None):
    'estimate_constant at each damping value; returns the estimates in order.'
    if len(gammas) == 0:
        raise EnsembleError('empty gamma list')
    return [estimate_constant(op, rho, gamma, ensemble, T, dt) for gamma in gammas]


def multiplier_field(grid, u):
    'm·∇u by centered differences at interior nodes, zero on the boundary.'
    U = u.reshape(grid.shape)
    out = np.zeros(grid.shape)
    inner = tuple(slice(1, -1) for _ in grid.shape)
    m = grid.multiplier
    for a, h in enumerate(grid.h):
        hi = list(inner); hi[a] = slice(2, None)
        lo = list(inner); lo[a] = slice(None, -2)
        du = (U[tuple(hi)] - U[tuple(lo)])/(2*h)
        out[inner] += m[:, a].reshape(grid.shape)[inner]*du
    return out.reshape(-1)


def _time_derivative(values, dt):
    'Second-order differences along axis 0: central inside, one-sided at both ends.'
    d = np.empty_like(values)
    d[1:-1] = (values[2:] - values[:-2])/(2*dt)
    d[0] = (-3*values[0] + 4*values[1] - values[2])/(2*dt)
    d[-1] = (3*values[-1] - 4*values[-2] + values[-3])/(2*dt)
    return d


@dataclass
class MultiplierDiagnostics:
    I1: float
    I2: float
    I3: float
    closure: float
    relative_closure: float
    I2_identity_residual: float        # I2 − [(2 − n/2)∫∫|Δu|² − ½∫∫(m·n)|Δu|²]
    I1_identity_residual: float        # I1 − ([∫ρv(m·∇u)]₀ᵀ − ∫∫ρv(m·∇v))
    I3_rhs: float                      # −(γn/2)∫∫|v|²
    I3_velocity_form: float            # ∫∫γv(m·∇v), whose continuum value is I3_rhs
    boundary_term: float               # ½∫∫(m·n)|Δu|²

    def as_dict(self):
        return dict(self.__dict__)


def multiplier_diagnostics(snapshots, op, rho, gamma, dt, stride=1):
    '''Quadrature of the multiplier integrals over a trajectory stored at every step.

    u_tt is taken from time differences of the stored velocities, so the
    closure I1 + I2 + I3 measures the scheme's consistency rather than
    vanishing by construction.'''
    if stride != 1:
        raise TimeStepError('multiplier diagnostics need a snapshot at every step, got stride %d' % stride)
    if len(snapshots) < 3:
        raise TimeStepError('multiplier diagnostics need at least 3 snapshots, got %d' % len(snapshots))

    grid = op.grid
    n = grid.dimension
    times = np.array([s.t for s in snapshots])
    U = np.array([s.u for s in snapshots])
    V = np.array([s.v for s in snapshots])
    A = _time_derivative(V, dt)

    mu = np.array([multiplier_field(grid, u) for u in U])
    mv = np.array([multiplier_field(grid, v) for v in V])
    BU = np.array([op.bilap(u) for u in U])
    LU = np.array([op.lap(u) for u in U])
    W = grid.weights
    r = rho.values

    def volume(integrand):
        return time_integral(times, integrand @ W)

    I1 = volume(r*A*mu)
    I2 = volume(BU*mu)
    I3 = volume(gamma*V*mu)
    total = abs(I1) + abs(I2) + abs(I3)
    closure = I1 + I2 + I3

    lap_sq = volume(LU**2)
    mn = grid.m_dot_n
    traces = np.array([boundary_traces(op, u)[0] for u in U])
    boundary_term = 0.5*time_integral(times, (traces**2) @ (grid.boundary_weights*mn))
    I2_expected = (2 - n/2)*lap_sq - boundary_term

    bracket = grid.inner(r*V[-1], mu[-1]) - grid.inner(r*V[0], mu[0])
    I1_expected = bracket - volume(r*V*mv)

    return MultiplierDiagnostics(I1=I1, I2=I2, I3=I3, closure=closure,
                                 relative_closure=abs(closure)/total if total > 0 else 0.0,
                                 I2_identity_residual=I2 - I2_expected,
                                 I1_identity_residual=I1 - I1_expected,
                                 I3_rhs=-(gamma*n/2)*volume(V**2),
                                 I3_velocity_form=volume(gamma*V*mv),
                                 boundary_term=boundary_term)
