'''
Paired-solution difference experiments, empirical Lipschitz-stability
ratios, and the two reconstructions: the inclusion density contrast and the
initial displacement in an eigenmode basis.
'''

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from visidata import vd, Progress

from .biharmonic import h4_norm, spectrum
from .errors import EnsembleError, SearchError, GridError, TimeStepError
from .evolution import (State, Stepper, Recorder, simulate, acceleration,
                        midpoint, default_dt, time_integral, BoundaryRecord)
from .fields import make_initial_data, InitialData, require_admissible

__all__ = ['StabilityReport', 'difference_experiment', 'stability_scan',
           'InitialTimeEstimate', 'initial_time_estimates', 'IntegralEstimates',
           'integral_estimates', 'DensityReconstruction', 'reconstruct_density',
           'InitialReconstruction', 'reconstruct_initial', 'add_trace_noise',
           'restrict_record']


def _ratio(num, J, gamma):
    if num == 0:
        return 0.0
    if J <= 0:
        return float('inf')
    return num/(math.sqrt(1 + gamma)*math.sqrt(J))


@dataclass
class IntegralEstimates:
    'Realized sides of the integral bounds that follow from the uniform energy bound.'
    K: float
    bound: float                    # 2E(0) + K‖ρ‖²T²
    int_E: float
    int_E_rhs: float
    int_sqrtE: float
    int_sqrtE_rhs: float
    E_T: float
    combined_lhs: float             # E(0)
    combined_rhs: float

    @property
    def ok(self):
        pairs = [(self.int_E, self.int_E_rhs), (self.int_sqrtE, self.int_sqrtE_rhs),
                 (self.E_T, self.bound), (self.combined_lhs, self.combined_rhs)]
        return all(lhs <= rhs*(1 + 1e-10) + 1e-300 for lhs, rhs in pairs)


def integral_estimates(trace, rho_diff_inf, M, rho_min, gamma):
    '''Check ∫E ≤ T·B, ∫√E ≤ T√B, E(T) ≤ B with B = 2E(0) + K‖ρ‖²T², K = M²/(2ρmin),
    and the combined bound on E(0) they produce.'''
    times = np.asarray(trace.times)
    T = float(times[-1] - times[0])
    E = np.asarray(trace.E)
    E0 = float(E[0])
    K = M*M/(2*rho_min)
    B = 2*E0 + K*rho_diff_inf**2*T**2
    c = rho_diff_inf*M*math.sqrt(2/rho_min)
    return IntegralEstimates(K=K, bound=B,
                             int_E=time_integral(times, E), int_E_rhs=T*B,
                             int_sqrtE=time_integral(times, np.sqrt(E)), int_sqrtE_rhs=T*math.sqrt(B),
                             E_T=float(E[-1]),
                             combined_lhs=E0,
                             combined_rhs=gamma*(2/rho_min)*T*B + c*T*math.sqrt(B) + B)


@dataclass(eq=False)
class StabilityReport:
    rho_diff_inf: float
    f_diff_H4: float
    g_diff_L2: float
    J: float
    gamma: float
    T: float
    M_observed: float
    ratio_thm1: float
    ratio_thm2: Optional[float]     # only when g1 == g2
    E0_diff: float
    cross_check: float              # max‖(u + u2) − u1‖∞ / max‖u1‖∞
    uniform_bound_ok: bool
    uniform_bound_sharp_ok: bool
    energy_chain_ok: bool
    large_contrast: bool
    estimates: Optional[IntegralEstimates] = None
    energy: Optional[object] = None         # EnergyTrace of the difference
    record: Optional[BoundaryRecord] = None
    warnings: list = field(default_factory=list)
    label: str = ''

    def as_dict(self):
        return dict(label=self.label, contrast=self.rho_diff_inf, gamma=self.gamma, T=self.T,
                    rho_diff_inf=self.rho_diff_inf, f_diff_H4=self.f_diff_H4, g_diff_L2=self.g_diff_L2,
                    J=self.J, M_observed=self.M_observed, ratio_thm1=self.ratio_thm1,
                    ratio_thm2=self.ratio_thm2, E0_diff=self.E0_diff, cross_check=self.cross_check,
                    uniform_bound_ok=self.uniform_bound_ok, energy_chain_ok=self.energy_chain_ok,
                    large_contrast=self.large_contrast)


def difference_experiment(op, params1, params2, gamma, T, dt=None, check=True, label=''):
    '''Run u2, the forced difference u and u1 in lock-step.

    *params1*, *params2* are (DensityField, InitialData) pairs.  The difference
    obeys ρ1 u_tt + Δ²u + γu_t = −(ρ1 − ρ2)·u2_tt with u2_tt taken from u2's
    equation at each step midpoint; u + u2 is compared against u1.'''
    rho1, data1 = params1
    rho2, data2 = params2
    if rho1.grid is not op.grid or rho2.grid is not op.grid:
        raise GridError('both densities must live on the operator grid')
    if not T > 0:
        raise TimeStepError('horizon T must be positive, got %r' % (T,))
    if dt is None:
        dt = default_dt(op.grid)
    if not 0 < dt <= T:
        raise TimeStepError('need 0 < dt <= T, got dt=%r T=%r' % (dt, T))
    warnings = require_admissible(op, rho1, data1) + require_admissible(op, rho2, data2) if check else []
    steps = math.ceil(T/dt - 1e-9)
    dt = T/steps

    grid = op.grid
    drho = rho1.values - rho2.values
    diff = data1 - data2

    step1 = Stepper(op, rho1, gamma, dt)
    step2 = Stepper(op, rho2, gamma, dt)
    rec = Recorder(op, rho1, gamma)

    s1, s2, sd = State.initial(data1), State.initial(data2), State.initial(diff)
    rec.start(sd)
    M = grid.norm(acceleration(op, rho2, gamma, s2.u, s2.v))
    u1_scale = np.abs(s1.u).max()
    cross = np.abs(sd.u + s2.u - s1.u).max()

    for _ in Progress(range(steps), gerund='differencing'):
        n2 = step2.step(s2)
        ubar, vbar = midpoint(s2, n2)
        a2_mid = acceleration(op, rho2, gamma, ubar, vbar)
        S = -drho*a2_mid
        nd = step1.step(sd, S)
        n1 = step1.step(s1)
        rec.advance(sd, nd, S)
        M = max(M, grid.norm(a2_mid), grid.norm(acceleration(op, rho2, gamma, n2.u, n2.v)))
        u1_scale = max(u1_scale, np.abs(n1.u).max())
        cross = max(cross, np.abs(nd.u + n2.u - n1.u).max())
        s1, s2, sd = n1, n2, nd

    trace, record = rec.finish()
    rho_inf = float(np.abs(drho).max())
    g_l2 = grid.norm(diff.g)
    f_h4 = h4_norm(op, diff.f)
    J = record.J
    E0 = float(trace.E[0])
    rho_min = rho1.rho_min

    K = M*M/(2*rho_min)
    slack = 1e-9*max(trace.E.max(), 1e-300)
    uniform_ok = bool(np.all(trace.E <= 2*E0 + K*rho_inf**2*T**2 + slack))
    sharp = (math.sqrt(E0) + 0.5*rho_inf*M*math.sqrt(2/rho_min)*T)**2
    sharp_ok = bool(np.all(trace.E <= sharp + slack))
    chain_rhs = (trace.dissipated[-1] + rho_inf*M*math.sqrt(2/rho_min)*time_integral(trace.times, np.sqrt(trace.E))
                 + trace.E[-1])
    chain_ok = bool(E0 <= chain_rhs + slack)

    large = rho_inf > min(rho1.rho_min, rho2.rho_min)
    if large:
        msg = 'contrast %g exceeds the smaller density minimum; outside the linearization regime' % rho_inf
        vd.warning(msg)
        warnings.append(msg)
    if not uniform_ok:
        msg = 'difference energy exceeds 2E(0) + K|rho|^2 T^2 (contrast %g, gamma %g)' % (rho_inf, gamma)
        vd.warning(msg)
        warnings.append(msg)

    g_equal = bool(np.array_equal(data1.g, data2.g))
    return StabilityReport(rho_diff_inf=rho_inf, f_diff_H4=f_h4, g_diff_L2=g_l2, J=J, gamma=gamma, T=T,
                           M_observed=M,
                           ratio_thm1=_ratio(rho_inf, J, gamma),
                           ratio_thm2=_ratio(f_h4, J, gamma) if g_equal else None,
                           E0_diff=E0,
                           cross_check=cross/u1_scale if u1_scale > 0 else cross,
                           uniform_bound_ok=uniform_ok, uniform_bound_sharp_ok=sharp_ok,
                           energy_chain_ok=chain_ok, large_contrast=large,
                           estimates=integral_estimates(trace, rho_inf, M, rho_min, gamma),
                           energy=trace, record=record, warnings=warnings, label=label)


def stability_scan(op, base, variants, gammas, T, dt=None):
    '''One difference_experiment per (variant, γ).

    *base* is (rho2, data2); each variant is a DensityField (same initial
    data as the base) or a (rho1, data1) pair.'''
    if len(variants) == 0:
        raise EnsembleError('empty contrast list')
    if len(gammas) == 0:
        raise EnsembleError('empty gamma list')
    rho2, data2 = base
    jobs = []
    for i, variant in enumerate(variants):
        params1 = variant if isinstance(variant, tuple) else (variant, data2)
        for gamma in gammas:
            jobs.append((params1, gamma, 'variant %d' % i))

    with ThreadPoolExecutor(max_workers=vd.options.plate_threads) as executor:
        return list(executor.map(lambda j: difference_experiment(op, j[0], base, j[1], T, dt, label=j[2]),
                                 Progress(jobs, gerund='scanning')))


@dataclass
class InitialTimeEstimate:
    lhs: float                  # ‖Δ²f‖
    g_norm: float
    rho_diff_inf: float
    C1: Optional[float]         # lhs/(‖g‖ + ‖ρ‖∞), None when the denominator vanishes
    flagged: bool
    a_norm: float               # ‖u_tt(0)‖ of the difference
    a2_norm: float              # ‖u2_tt(0)‖
    triangle_rhs: float         # ‖ρ1‖∞‖u_tt(0)‖ + γ‖g‖ + ‖ρ‖∞‖u2_tt(0)‖


def initial_time_estimates(op, rho1, rho2, data1, data2, gamma):
    'Both sides of ‖Δ²f‖ ≤ C1(‖g‖ + ‖ρ‖∞) at t = 0, accelerations from the equations.'
    grid = op.grid
    f = data1.f - data2.f
    g = data1.g - data2.g
    drho = rho1.values - rho2.values
    lhs = grid.norm(op.bilap(f))
    g_norm = grid.norm(g)
    rho_inf = float(np.abs(drho).max())
    a2 = acceleration(op, rho2, gamma, data2.f, data2.g)
    a = acceleration(op, rho1, gamma, f, g, forcing=-drho*a2)
    denom = g_norm + rho_inf
    flagged = denom == 0
    if flagged and lhs > 0:
        vd.warning('initial-time estimate has a zero denominator with nonzero f difference')
    return InitialTimeEstimate(lhs=lhs, g_norm=g_norm, rho_diff_inf=rho_inf,
                               C1=None if flagged else lhs/denom, flagged=flagged,
                               a_norm=grid.norm(a), a2_norm=grid.norm(a2),
                               triangle_rhs=np.abs(rho1.values).max()*grid.norm(a) + gamma*g_norm + rho_inf*grid.norm(a2))


def add_trace_noise(record, level, seed=0):
    'Additive Gaussian noise scaled by *level* times the largest value of each trace kind.'
    rng = np.random.default_rng(seed)
    lap = record.trace_lap + level*np.abs(record.trace_lap).max()*rng.standard_normal(record.trace_lap.shape)
    nlap = record.trace_nlap + level*np.abs(record.trace_nlap).max()*rng.standard_normal(record.trace_nlap.shape)
    return BoundaryRecord(times=record.times, trace_lap=lap, trace_nlap=nlap, quadrature=record.quadrature)


def restrict_record(fine_record, fine_grid, coarse_grid):
    'Sample a record taken on the refined grid at the coarse boundary nodes and time levels present in both.'
    if tuple(2*n - 1 for n in coarse_grid.n_nodes) != tuple(fine_grid.n_nodes):
        raise GridError('%s is not the refinement of %s' % (fine_grid.n_nodes, coarse_grid.n_nodes))
    idx = np.array(np.unravel_index(coarse_grid.boundary_index, coarse_grid.n_nodes))*2
    flat = np.ravel_multi_index(tuple(idx), fine_grid.n_nodes)
    cols = np.searchsorted(fine_grid.boundary_index, flat)
    return BoundaryRecord(times=fine_record.times, trace_lap=fine_record.trace_lap[:, cols],
                          trace_nlap=fine_record.trace_nlap[:, cols], quadrature=coarse_grid.boundary_weights)


@dataclass(eq=False)
class DensityReconstruction:
    rho1_hat: float
    misfit: float
    samples: list               # [(rho1, misfit)] from the coarse pass
    evaluations: list           # coarse samples, then the refinement in evaluation order
    unimodal: bool
    warnings: list = field(default_factory=list)


def _is_unimodal(values):
    'True when the samples fall and then rise, ties ignored.'
    d = np.sign(np.diff(values))
    d = d[d != 0]
    return not np.any((d[:-1] > 0) & (d[1:] < 0))


def reconstruct_density(op, observed, rho_base, data, gamma, T, bounds, dt=None, tol=None, samples=None):
    '''Recover the inclusion density by minimizing the boundary misfit over rho1 in *bounds*.

    *rho_base* supplies rho0 and the inclusion geometry.  A coarse sampling
    pass locates the bracket, then bounded Brent search refines it.'''
    lo, hi = (float(b) for b in bounds)
    if not 0 < lo < hi:
        raise SearchError('search range (%g, %g) must satisfy 0 < lo < hi' % (lo, hi))
    tol = tol or vd.options.plate_search_tol
    samples = samples or vd.options.plate_search_samples
    refined = []

    def misfit(rho1):
        result = simulate(op, rho_base.with_rho1(rho1), gamma, data, T, dt, check=False)
        return observed.misfit(result.record)

    def tracked(rho1):
        value = misfit(rho1)
        refined.append((float(rho1), value))
        return value

    xs = np.linspace(lo, hi, samples)
    with ThreadPoolExecutor(max_workers=vd.options.plate_threads) as executor:
        ys = list(executor.map(misfit, Progress(xs, gerund='sampling')))
    coarse = list(zip(xs.tolist(), ys))
    i = int(np.argmin(ys))
    if i == 0 or i == len(xs) - 1:
        raise SearchError('misfit is smallest at the end of the range (%g, %g); widen it' % (lo, hi))

    warnings = []
    unimodal = _is_unimodal(ys)
    if not unimodal:
        msg = 'density misfit is not unimodal over (%g, %g)' % (lo, hi)
        vd.warning(msg)
        warnings.append(msg)

    res = scipy.optimize.minimize_scalar(tracked, bounds=(xs[i-1], xs[i+1]), method='bounded',
                                         options=dict(xatol=tol/4))
    best_x, best_y = (float(res.x), float(res.fun)) if res.fun <= ys[i] else (float(xs[i]), float(ys[i]))
    vd.status('rho1 estimate %.6g, misfit %.3g' % (best_x, best_y))
    return DensityReconstruction(rho1_hat=best_x, misfit=best_y, samples=coarse,
                                 evaluations=coarse + refined, unimodal=unimodal, warnings=warnings)


@dataclass(eq=False)
class InitialReconstruction:
    coefficients: np.ndarray
    residual: float
    rank_deficient: bool
    singular_values: np.ndarray
    f_hat: np.ndarray
    warnings: list = field(default_factory=list)


def reconstruct_initial(op, observed, rho, g, gamma, T, k, reg=0.0, dt=None, eigenpairs=None):
    '''Recover f = Σ c_j φ_j from boundary data with g known.

    The baseline record of (0, g) is removed; the remainder is linear in f,
    so c solves the weighted, regularized normal equations over the records
    of the first *k* eigenmodes.'''
    grid = op.grid
    g = grid.field(g, 'g')
    if eigenpairs is None or len(eigenpairs) < k:
        eigenpairs = spectrum(op, rho, k)

    baseline = simulate(op, rho, gamma, InitialData(f=grid.zeros(), g=g, description='baseline'), T, dt, check=False).record
    observed.check_compatible(baseline)
    sw = np.sqrt(observed.weights())
    b = sw*(observed.flat() - baseline.flat())

    def basis_record(j):
        data = make_initial_data(op, 'eigenmode', rho=rho, eigenpairs=eigenpairs, k=j)
        return simulate(op, rho, gamma, InitialData(f=data.f, g=grid.zeros(), description=data.description),
                        T, dt, check=False).record.flat()

    with ThreadPoolExecutor(max_workers=vd.options.plate_threads) as executor:
        columns = list(executor.map(basis_record, Progress(range(1, k+1), gerund='basis')))
    A = sw[:, None]*np.array(columns).T

    s = scipy.linalg.svdvals(A)
    warnings = []
    rank_deficient = bool(reg == 0 and (len(s) < k or s[0] == 0 or s[-1] <= s[0]*max(A.shape)*np.finfo(float).eps))
    if rank_deficient:
        msg = 'modal system is rank deficient (condition %.3g); add regularization' % (s[0]/s[-1] if s[-1] else float('inf'))
        vd.warning(msg)
        warnings.append(msg)

    if reg > 0:
        c = scipy.linalg.solve(A.T @ A + reg*np.eye(k), A.T @ b, assume_a='pos')
    else:
        c = scipy.linalg.lstsq(A, b)[0]
    bnorm = np.linalg.norm(b)
    residual = float(np.linalg.norm(A @ c - b)/bnorm) if bnorm > 0 else 0.0
    f_hat = sum(cj*phi for cj, (_, phi) in zip(c, eigenpairs))
    return InitialReconstruction(coefficients=c, residual=residual, rank_deficient=rank_deficient,
                                 singular_values=s, f_hat=f_hat, warnings=warnings)
