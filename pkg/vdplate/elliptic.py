'''
Reaction-biharmonic solves (Δ²_h + diag(c))u = F and the resolvent of the
plate system operator built on them.
'''

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from visidata import vd, Progress

from .errors import SolverBreakdown, EnsembleError

__all__ = ['ReactionSolver', 'solve_reaction_biharmonic', 'ResolventProblem',
           'ResolventResult', 'solve_resolvent', 'resolvent_operator',
           'ContractionReport', 'contraction_check', 'resolvent_identity_defect',
           'energy_norm']


class ReactionSolver:
    '''Factorized interior system Δ²_h + diag(c), reusable across right-hand sides.

    Sparse LU up to plate_direct_max unknowns, Jacobi-preconditioned CG above.'''
    def __init__(self, op, c):
        self.op = op
        grid = op.grid
        c = np.broadcast_to(np.asarray(c, dtype=float), (grid.size,))
        if np.any(c < 0):
            raise SolverBreakdown('reaction coefficient must be nonnegative, min is %g' % c.min())
        self.c_int = c[grid.interior_index]
        self.A = sps.csc_matrix(op.B + sps.diags(self.c_int))
        self.direct = grid.n_interior <= vd.options.plate_direct_max
        if self.direct:
            self._lu = spla.splu(self.A)
        else:
            dinv = 1/self.A.diagonal()
            self._precond = spla.LinearOperator(self.A.shape, matvec=lambda x: dinv*x)

    def solve_interior(self, F_int):
        if not np.any(F_int):
            return np.zeros_like(F_int)
        if self.direct:
            u = self._lu.solve(F_int)
        else:
            u, info = spla.cg(self.A, F_int, rtol=vd.options.plate_cg_rtol, atol=0.0, M=self._precond)
            if info < 0:
                raise SolverBreakdown('CG breakdown (info=%d)' % info)
        residual = np.linalg.norm(self.A @ u - F_int) / np.linalg.norm(F_int)
        if not residual <= vd.options.plate_solve_rtol:
            raise SolverBreakdown('reaction-biharmonic solve reached residual %.3g' % residual, residual=residual)
        return u

    def solve(self, F):
        'Solve for interior values given F on all nodes; returns u on all nodes, zero on the boundary.'
        grid = self.op.grid
        F = grid.field(F, 'F')
        return grid.extend(self.solve_interior(F[grid.interior_index]))


def solve_reaction_biharmonic(op, c, F):
    return ReactionSolver(op, c).solve(F)


def energy_norm(op, rho, u, v):
    '(‖Δ_h u‖² + ‖√ρ v‖²)^½, the norm in which the plate operator is dissipative.'
    g = op.grid
    Lu = op.lap(u)
    return math.sqrt(g.inner(Lu, Lu) + g.inner(rho.values*v, v))


@dataclass
class ResolventProblem:
    op: object
    lam: float
    gamma: float
    rho: object
    y1: np.ndarray
    y2: np.ndarray

    def __post_init__(self):
        if not self.lam > 0:
            raise SolverBreakdown('resolvent needs lambda > 0, got %r' % (self.lam,))
        g = self.op.grid
        self.y1 = g.field(self.y1, 'y1')
        self.y2 = g.field(self.y2, 'y2')


@dataclass
class ResolventResult:
    u: np.ndarray
    v: np.ndarray
    residual: float


def resolvent_operator(op, rho, gamma, lam):
    'ReactionSolver for the reduced system Δ²u + (λ²ρ + γλ)u = F.'
    return ReactionSolver(op, lam*lam*rho.values + gamma*lam)


def solve_resolvent(problem, solver=None):
    '''Solve (λI − A)(u, v) = (y1, y2) through the reduced reaction-biharmonic system.

    v = λu − y1 exactly; the residual is measured in the energy norm.'''
    p = problem
    rho = p.rho.values
    if solver is None:
        solver = resolvent_operator(p.op, p.rho, p.gamma, p.lam)
    F = rho*p.y2 + rho*p.lam*p.y1 + p.gamma*p.y1
    u = solver.solve(F)
    v = p.lam*u - p.y1

    ynorm = energy_norm(p.op, p.rho, p.y1, p.y2)
    if ynorm == 0:
        return ResolventResult(u=u, v=v, residual=0.0)
    r1 = p.lam*u - v - p.y1
    r2 = p.lam*v + (p.op.bilap(u) + p.gamma*v)/rho - p.y2
    return ResolventResult(u=u, v=v, residual=energy_norm(p.op, p.rho, r1, r2)/ynorm)


@dataclass
class ContractionReport:
    lam: float
    gamma: float
    resolvent_bound: float          # max over nonzero members of λ‖R(λ)y‖/‖y‖
    max_residual: float
    per_member: list = field(default_factory=list)
    skipped: int = 0


def contraction_check(op, rho, gamma, lam, ensemble=None, count=10, seed=0):
    '''Measure λ‖R(λ)y‖/‖y‖ over an ensemble of (y1, y2) = (f, g) pairs.

    Zero members are skipped; the default ensemble is *count* seeded random admissible pairs.'''
    from .fields import make_initial_data
    if ensemble is None:
        if count < 10:
            raise EnsembleError('need at least 10 members, got %d' % count)
        ensemble = [make_initial_data(op, 'random', seed=seed+i) for i in range(count)]

    solver = resolvent_operator(op, rho, gamma, lam)

    def _one(y):
        ynorm = energy_norm(op, rho, y.f, y.g)
        if ynorm == 0:
            return None
        res = solve_resolvent(ResolventProblem(op, lam, gamma, rho, y.f, y.g), solver)
        return lam*energy_norm(op, rho, res.u, res.v)/ynorm, res.residual

    with ThreadPoolExecutor(max_workers=vd.options.plate_threads) as executor:
        results = list(executor.map(_one, Progress(ensemble, gerund='solving')))

    ratios = [r for r in results if r is not None]
    return ContractionReport(lam=lam, gamma=gamma,
                             resolvent_bound=max((r[0] for r in ratios), default=0.0),
                             max_residual=max((r[1] for r in ratios), default=0.0),
                             per_member=[r[0] for r in ratios],
                             skipped=len(results) - len(ratios))


def resolvent_identity_defect(op, rho, gamma, lam1, lam2, y1, y2):
    'Relative energy-norm defect of R(λ1)y − R(λ2)y = (λ2 − λ1)R(λ1)R(λ2)y.'
    R1 = resolvent_operator(op, rho, gamma, lam1)
    R2 = resolvent_operator(op, rho, gamma, lam2)
    a = solve_resolvent(ResolventProblem(op, lam1, gamma, rho, y1, y2), R1)
    b = solve_resolvent(ResolventProblem(op, lam2, gamma, rho, y1, y2), R2)
    ab = solve_resolvent(ResolventProblem(op, lam1, gamma, rho, b.u, b.v), R1)
    du = a.u - b.u - (lam2 - lam1)*ab.u
    dv = a.v - b.v - (lam2 - lam1)*ab.v
    scale = max(energy_norm(op, rho, a.u, a.v), energy_norm(op, rho, b.u, b.v))
    if scale == 0:
        return 0.0
    return energy_norm(op, rho, du, dv)/scale
