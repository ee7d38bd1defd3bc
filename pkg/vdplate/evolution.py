'''
Implicit-midpoint time integration of ρ u_tt + Δ²u + γ u_t = S with clamped
boundaries, with energy traces and boundary (Cauchy data) records.

One step solves (Δ²_h + 4ρ/dt² + 2γ/dt) w = 4ρ v_n/dt − 2Δ²_h u_n + 2 S_mid
for the increment w = u_{n+1} − u_n, then v_{n+1} = 2w/dt − v_n.  The
dissipation and forcing-work integrals use the midpoint velocity, which is
exactly what the scheme dissipates, so E(T) − E(0) + γ∫∫|v|² − ∫∫S·v closes
to solver tolerance.
'''

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from visidata import vd, Progress

from .biharmonic import energy, boundary_traces
from .elliptic import ReactionSolver
from .errors import TimeStepError
from .fields import require_admissible

__all__ = ['State', 'EnergyTrace', 'BoundaryRecord', 'SimulationResult',
           'GrowthCheck', 'Stepper', 'step', 'simulate', 'reverse',
           'acceleration', 'midpoint', 'midpoint_phase', 'default_dt',
           'dissipation_residual', 'growth_bound_check', 'time_integral']


@dataclass(frozen=True, eq=False)
class State:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, data, t=0.0):
        return cls(u=np.array(data.f, dtype=float), v=np.array(data.g, dtype=float), t=t)


def time_integral(times, values):
    'Trapezoid rule in time.'
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 2:
        return 0.0
    return float(np.sum(0.5*(values[1:] + values[:-1])*np.diff(times)))


@dataclass(eq=False)
class EnergyTrace:
    times: np.ndarray
    E: np.ndarray
    kinetic: np.ndarray
    bending: np.ndarray
    H_norm: np.ndarray          # graph form (‖Δ²u‖² + ‖√ρv‖²)^½
    energy_norm: np.ndarray     # (2E)^½
    dissipated: np.ndarray      # running γ∫∫|v|²
    work: np.ndarray            # running ∫∫S·v
    fitted_K: float = 0.0

    def __len__(self):
        return len(self.times)

    @property
    def E0(self):
        return float(self.E[0])

    @property
    def rows(self):
        return [dict(t=t, E=E, kinetic=k, bending=b, H_norm=h, energy_norm=en, dissipated=d, work=w)
                for t, E, k, b, h, en, d, w in zip(self.times, self.E, self.kinetic, self.bending,
                                                  self.H_norm, self.energy_norm, self.dissipated, self.work)]


@dataclass(eq=False)
class BoundaryRecord:
    times: np.ndarray
    trace_lap: np.ndarray       # (n_times, n_boundary) Δu on ∂Ω
    trace_nlap: np.ndarray      # (n_times, n_boundary) ∂nΔu on ∂Ω
    quadrature: np.ndarray      # boundary weights dS
    J: float = 0.0

    def __post_init__(self):
        self.trace_lap = np.asarray(self.trace_lap, dtype=float)
        self.trace_nlap = np.asarray(self.trace_nlap, dtype=float)
        self.J = self.functional()

    def density(self):
        'Per-time ∫∂Ω (|∂nΔu|² + |Δu|²) dS.'
        return (self.trace_nlap**2 + self.trace_lap**2) @ self.quadrature

    def functional(self):
        return time_integral(self.times, self.density())

    def _like(self, lap, nlap):
        return BoundaryRecord(times=self.times, trace_lap=lap, trace_nlap=nlap, quadrature=self.quadrature)

    def scaled(self, alpha):
        return self._like(alpha*self.trace_lap, alpha*self.trace_nlap)

    def __sub__(self, other):
        self.check_compatible(other)
        return self._like(self.trace_lap - other.trace_lap, self.trace_nlap - other.trace_nlap)

    def __add__(self, other):
        self.check_compatible(other)
        return self._like(self.trace_lap + other.trace_lap, self.trace_nlap + other.trace_nlap)

    def check_compatible(self, other):
        if self.trace_lap.shape != other.trace_lap.shape or not np.allclose(self.times, other.times):
            raise TimeStepError('boundary records differ in grid or time levels: %s vs %s'
                                % (self.trace_lap.shape, other.trace_lap.shape))

    def misfit(self, other):
        'J of the difference of two records.'
        return (self - other).J

    def flat(self):
        'All stored trace values as one vector (lap then nlap per time level).'
        return np.concatenate([self.trace_lap, self.trace_nlap], axis=1).reshape(-1)

    def weights(self):
        'Quadrature weight of each entry of flat(), so that J = Σ weights·flat².'
        times = np.asarray(self.times, dtype=float)
        wt = np.zeros(len(times))
        if len(times) > 1:
            d = np.diff(times)
            wt[:-1] += d/2
            wt[1:] += d/2
        per_time = np.concatenate([self.quadrature, self.quadrature])
        return np.outer(wt, per_time).reshape(-1)


def default_dt(grid):
    dt = vd.options.plate_dt
    return dt if dt > 0 else min(1e-3, grid.h_min**2)


def midpoint_phase(omega, dt):
    'Phase advanced per step by the midpoint rule on a mode of angular frequency omega.'
    return 2*math.atan(omega*dt/2)


def midpoint(s0, s1):
    return 0.5*(s0.u + s1.u), 0.5*(s0.v + s1.v)


def acceleration(op, rho, gamma, u, v, forcing=None):
    'u_tt = ρ⁻¹(−Δ²u − γv + S), evaluated from the equation.'
    a = -op.bilap(u) - gamma*v
    if forcing is not None:
        a = a + forcing
    a = a / rho.values
    a[op.grid.boundary_index] = 0
    return a


class Stepper:
    'Implicit midpoint stepper with the step matrix factorized once.'
    def __init__(self, op, rho, gamma, dt):
        if dt == 0 or not math.isfinite(dt):
            raise TimeStepError('time step must be nonzero and finite, got %r' % (dt,))
        if dt < 0 and gamma != 0:
            raise TimeStepError('backward steps need gamma = 0, got gamma=%g' % gamma)
        if gamma < 0:
            raise TimeStepError('damping must be nonnegative, got %g' % gamma)
        self.op = op
        self.rho = rho
        self.gamma = gamma
        self.dt = dt
        self.solver = ReactionSolver(op, 4*rho.values/dt**2 + 2*gamma/dt)

    def step(self, state, forcing=None):
        'Advance one step; *forcing* is S at the midpoint time, on all nodes.'
        op, dt = self.op, self.dt
        g = op.grid
        rhs = 4*self.rho.values*state.v/dt - 2*op.bilap(state.u)
        if forcing is not None:
            rhs = rhs + 2*g.field(forcing, 'forcing')
        w = self.solver.solve(rhs)
        v = 2*w/dt - state.v
        v[g.boundary_index] = 0
        return State(u=state.u + w, v=v, t=state.t + dt)


def step(op, rho, gamma, state, dt, forcing=None):
    'One implicit-midpoint step; *forcing* is an array or a callable S(t).'
    if callable(forcing):
        forcing = forcing(state.t + dt/2)
    return Stepper(op, rho, gamma, dt).step(state, forcing)


class Recorder:
    'Accumulates energy, boundary traces and optional snapshots along one trajectory.'
    def __init__(self, op, rho, gamma, snapshot_stride=0):
        self.op, self.rho, self.gamma = op, rho, gamma
        self.stride = snapshot_stride
        self.rows = []
        self.laps, self.nlaps = [], []
        self.dissipated = 0.0
        self.work = 0.0
        self.snapshots = []
        self.n = 0

    def observe(self, state):
        ev = energy(self.op, self.rho, state)
        self.rows.append((state.t, ev.E, ev.kinetic, ev.bending, math.sqrt(ev.H_norm_sq),
                          math.sqrt(ev.energy_norm_sq), self.dissipated, self.work))
        lap, nlap = boundary_traces(self.op, state.u)
        self.laps.append(lap)
        self.nlaps.append(nlap)
        if self.stride and self.n % self.stride == 0:
            self.snapshots.append(state)

    def start(self, state):
        self.observe(state)

    def advance(self, prev, new, forcing=None):
        g = self.op.grid
        dt = new.t - prev.t
        _, vbar = midpoint(prev, new)
        self.dissipated += self.gamma*abs(dt)*g.inner(vbar, vbar)
        if forcing is not None:
            self.work += dt*g.inner(forcing, vbar)
        self.n += 1
        self.observe(new)

    def finish(self):
        cols = np.array(self.rows, dtype=float).T
        trace = EnergyTrace(*cols)
        trace.fitted_K = growth_bound_check(trace).fitted_K
        record = BoundaryRecord(times=cols[0], trace_lap=np.array(self.laps), trace_nlap=np.array(self.nlaps),
                                quadrature=self.op.grid.boundary_weights)
        return trace, record


@dataclass(eq=False)
class SimulationResult:
    final: State
    energy: EnergyTrace
    record: BoundaryRecord
    dt: float
    steps: int
    snapshots: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def simulate(op, rho, gamma, data, T, dt=None, forcing=None, snapshot_stride=0, check=True):
    '''Integrate from (f, g) to time T in ⌈T/dt⌉ equal steps.

    The step is shrunk to T/⌈T/dt⌉ so the run ends exactly at T.  *forcing*
    is a callable S(t) evaluated at step midpoints.'''
    if not T > 0:
        raise TimeStepError('horizon T must be positive, got %r' % (T,))
    if dt is None:
        dt = default_dt(op.grid)
    if not 0 < dt <= T:
        raise TimeStepError('need 0 < dt <= T, got dt=%r T=%r' % (dt, T))
    warnings = require_admissible(op, rho, data) if check else []

    steps = math.ceil(T/dt - 1e-9)
    dt = T/steps
    stepper = Stepper(op, rho, gamma, dt)
    rec = Recorder(op, rho, gamma, snapshot_stride)
    state = State.initial(data)
    rec.start(state)
    for _ in Progress(range(steps), gerund='stepping'):
        S = forcing(state.t + dt/2) if forcing is not None else None
        new = stepper.step(state, S)
        rec.advance(state, new, S)
        state = new
    trace, record = rec.finish()
    return SimulationResult(final=state, energy=trace, record=record, dt=dt, steps=steps, snapshots=rec.snapshots,
                            warnings=warnings)


def reverse(op, rho, state, dt, n):
    'Step an undamped state backward n steps of size dt.'
    stepper = Stepper(op, rho, 0.0, -abs(dt))
    for _ in range(n):
        state = stepper.step(state)
    return state


def dissipation_residual(trace, eps=1e-300):
    '|E(T) − E(0) + dissipated − work| / max(E(0), eps).'
    if len(trace) == 0:
        return 0.0
    defect = trace.E[-1] - trace.E[0] + trace.dissipated[-1] - trace.work[-1]
    return float(abs(defect) / max(trace.E[0], eps))


@dataclass
class GrowthCheck:
    fitted_K: float
    violated: bool
    norm: str = 'energy'


def growth_bound_check(trace, initial_H=None, norm='energy'):
    '''Fit ‖(u,v)(t)‖ ≤ ‖(f,g)‖·e^{Kt} and report whether any sample exceeds the fit.

    norm='energy' uses (2E)^½; norm='graph' uses the (‖Δ²u‖² + ‖√ρv‖²)^½ form.'''
    H = np.asarray(trace.energy_norm if norm == 'energy' else trace.H_norm, dtype=float)
    t = np.asarray(trace.times, dtype=float) - trace.times[0]
    if initial_H is None:
        initial_H = float(H[0]) if len(H) else 0.0
    if initial_H <= 0 or len(H) < 2:
        return GrowthCheck(fitted_K=0.0, violated=False, norm=norm)
    pos = H > 0
    if pos.sum() < 2:
        return GrowthCheck(fitted_K=0.0, violated=False, norm=norm)
    slope = np.polyfit(t[pos], np.log(H[pos]/initial_H), 1)[0]
    K = max(0.0, float(slope))
    violated = bool(np.any(H > initial_H*np.exp(K*t)*(1 + 1e-6)))
    return GrowthCheck(fitted_K=K, violated=violated, norm=norm)
