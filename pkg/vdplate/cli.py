'''
vdplate command line: one subcommand per experiment, driven by a YAML config.

    vdplate simulate --config configs/simulate.yaml --out out/
'''

import json
import math
import sys
import time

import numpy as np

from visidata import vd, Path

from .biharmonic import ClampedOperator, spectrum, clamped_beam_eigenvalue
from .config import load_config, SUBCOMMANDS
from .elliptic import contraction_check, resolvent_identity_defect
from .errors import PlateError
from .evolution import simulate, default_dt, dissipation_residual, growth_bound_check
from .inversion import (stability_scan, initial_time_estimates, reconstruct_density,
                        reconstruct_initial, add_trace_noise, restrict_record)
from .observability import gamma_scan, multiplier_diagnostics
from .settings import PLATE_OPTIONS
from .sheets import (EnergyTraceSheet, BoundaryRecordSheet, SpectrumSheet, ResolventSheet,
                     ObservabilitySheet, MultiplierSheet, StabilitySheet, MisfitSheet,
                     CoefficientSheet, InitialEstimateSheet)
from .snapshots import write_snapshots

__all__ = ['main', 'run', 'Run']


def plain(obj):
    'Convert numpy scalars and arrays (recursively) to JSON-ready Python values.'
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


class Run:
    'Output directory, saved artifacts and collected warnings for one subcommand.'
    def __init__(self, subcommand, cfg):
        self.subcommand = subcommand
        self.cfg = cfg
        self.outdir = Path(cfg.output['directory'])
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.warnings = []
        self.records = {}
        self.started = time.perf_counter()

    def save(self, cls, name, source, **kwargs):
        vs = vd.plate_sheet(cls, name, source, **kwargs)
        for fmt in self.cfg.output['formats']:
            self.outputs.append(str(vd.save_plate_sheet(vs, self.outdir, fmt)))
        return vs

    def record(self, name, obj):
        'Write a structured record as <name>.json.'
        p = self.outdir/('%s.json' % name)
        with p.open_text(mode='w') as fp:
            json.dump(plain(obj), fp, indent=2, sort_keys=True)
        self.records[name] = str(p)
        self.outputs.append(str(p))

    def warn(self, msgs):
        self.warnings.extend(msgs)

    def manifest(self, status='ok', error=None):
        import psutil
        import scipy
        import visidata
        from . import __version__

        proc = psutil.Process()
        cpu = proc.cpu_times()
        manifest = dict(subcommand=self.subcommand,
                        status=status,
                        error=error,
                        config=self.cfg.resolved(),
                        seed=self.cfg.seed,
                        options={k: getattr(vd.options, k) for k in PLATE_OPTIONS},
                        versions=dict(vdplate=__version__, numpy=np.__version__,
                                      scipy=scipy.__version__, visidata=visidata.__version__),
                        warnings=self.cfg.warnings + self.warnings,
                        outputs=self.outputs,
                        resources=dict(elapsed_s=time.perf_counter() - self.started,
                                       cpu_user_s=cpu.user, cpu_system_s=cpu.system,
                                       max_rss_bytes=proc.memory_info().rss,
                                       threads=proc.num_threads()))
        p = self.outdir/'manifest.json'
        with p.open_text(mode='w') as fp:
            json.dump(plain(manifest), fp, indent=2, sort_keys=True)
        return p


def _setup(cfg):
    grid = cfg.build_grid()
    op = ClampedOperator(grid)
    rho = cfg.build_density(grid)
    T = cfg.horizon(grid, rho)
    dt = cfg.dt or default_dt(grid)
    return grid, op, rho, T, dt


def cmd_simulate(run, cfg):
    grid, op, rho, T, dt = _setup(cfg)
    data = cfg.build_initial(op, rho)[0]
    stride = cfg.dynamics['snapshot_stride']
    result = simulate(op, rho, cfg.gamma, data, T, dt, snapshot_stride=stride)
    run.warn(result.warnings)
    run.save(EnergyTraceSheet, 'energy', result.energy)
    run.save(BoundaryRecordSheet, 'boundary', result.record)
    if stride:
        run.outputs.append(str(write_snapshots(run.outdir/'snapshots', grid, result.snapshots, stride, result.dt)))
    growth = growth_bound_check(result.energy)
    run.record('simulation', dict(data=data.description, T=T, dt=result.dt, steps=result.steps,
                                  E0=result.energy.E0, J=result.record.J,
                                  dissipation_residual=dissipation_residual(result.energy),
                                  fitted_K=growth.fitted_K, growth_violated=growth.violated))


def cmd_resolvent(run, cfg):
    grid, op, rho, T, dt = _setup(cfg)
    ex = cfg.experiment
    count = int(ex.get('count', 10))
    rows = []
    for gamma in ex.get('gammas') or [0.0, 1.0, 5.0]:
        for lam in ex.get('lambdas') or [0.1, 1.0, 10.0]:
            rep = contraction_check(op, rho, gamma, lam, count=count, seed=cfg.seed)
            y = cfg.build_initial(op, rho, [dict(family='random', seed=cfg.seed)])[0]
            rows.append(dict(lam=lam, gamma=gamma, resolvent_bound=rep.resolvent_bound,
                             max_residual=rep.max_residual, members=len(rep.per_member),
                             skipped=rep.skipped,
                             identity_defect=resolvent_identity_defect(op, rho, gamma, lam, 2*lam, y.f, y.g)))
    run.save(ResolventSheet, 'resolvent', rows)


def cmd_spectrum(run, cfg):
    grid, op, rho, T, dt = _setup(cfg)
    k = int(cfg.experiment.get('k', 5))
    uniform = rho.rho_min == rho.rho_max
    rows = []
    for j, (lam, phi) in enumerate(spectrum(op, rho, k), start=1):
        continuum = clamped_beam_eigenvalue(j, grid.extents[0], rho.rho_min) if grid.dimension == 1 and uniform else None
        rows.append(dict(k=j, lam=lam, omega=math.sqrt(lam), continuum=continuum,
                         rel_error=abs(lam - continuum)/continuum if continuum else None))
    run.save(SpectrumSheet, 'spectrum', rows)


def cmd_observability(run, cfg):
    grid, op, rho, T, dt = _setup(cfg)
    ensemble = cfg.build_initial(op, rho)
    gammas = cfg.experiment.get('gammas') or [cfg.gamma]
    estimates = gamma_scan(op, rho, gammas, ensemble, T, dt)
    reports = [r for est in estimates for r in est.per_datum]
    run.save(ObservabilitySheet, 'observability', reports)
    for est in estimates:
        run.warn(est.warnings)
    C = [est.C_obs for est in estimates]
    run.record('constants', dict(T=T, gammas=gammas, C_obs=C,
                                 spread=max(C)/min(C) if min(C) > 0 else None))


def cmd_multiplier(run, cfg):
    grid, op, rho, T, dt = _setup(cfg)
    levels = int(cfg.experiment.get('refinements', 2))
    rows = []
    for r in range(levels):
        grid_r = cfg.build_grid(refine=r)
        op_r = ClampedOperator(grid_r)
        rho_r = cfg.build_density(grid_r)
        data = cfg.build_initial(op_r, rho_r)[0]
        result = simulate(op_r, rho_r, cfg.gamma, data, T, dt/2**r, snapshot_stride=1)
        run.warn(result.warnings)
        diag = multiplier_diagnostics(result.snapshots, op_r, rho_r, cfg.gamma, result.dt)
        rows.append(dict(diag.as_dict(), label='level %d' % r, h=grid_r.h_min, dt=result.dt))
    run.save(MultiplierSheet, 'multiplier', rows)
    factors = [rows[i]['relative_closure']/rows[i+1]['relative_closure']
               for i in range(len(rows)-1) if rows[i+1]['relative_closure'] > 0]
    run.record('closure', dict(relative_closure=[r['relative_closure'] for r in rows], reduction=factors))


def cmd_stability(run, cfg):
    grid, op, rho2, T, dt = _setup(cfg)
    ex = cfg.experiment
    data = cfg.build_initial(op, rho2)
    data1, data2 = data[0], data[1] if len(data) > 1 else data[0]
    variants = [rho2.with_rho1(rho2.parametric.rho0 + c) for c in ex.get('contrasts') or []]
    variants += [cfg.build_density(grid, d) for d in cfg.densities]
    gammas = ex.get('gammas') or [cfg.gamma]
    reports = stability_scan(op, (rho2, data2), [(v, data1) for v in variants], gammas, T, dt)
    for rep in reports:
        run.warn(rep.warnings)
    run.save(StabilitySheet, 'stability', reports)
    estimates = [initial_time_estimates(op, v, rho2, data1, data2, gammas[0]) for v in variants]
    run.save(InitialEstimateSheet, 'initial_estimates', estimates)
    run.record('integral_estimates', [dict(label=rep.label, gamma=rep.gamma, ok=rep.estimates.ok,
                                           **rep.estimates.__dict__) for rep in reports])


def _observe(cfg, grid, rho_true_spec, make_data, T, dt, gamma):
    '''Boundary record of the true density, taken on the refined grid when fine_data is set.

    Initial data come from *make_data(op, rho)* with the configured background
    density, the same data the reconstruction assumes.'''
    target = cfg.build_grid(refine=1) if cfg.fine_data else grid
    op = ClampedOperator(target)
    data = make_data(op, cfg.build_density(target))
    record = simulate(op, cfg.build_density(target, rho_true_spec), gamma, data, T, dt, check=False).record
    return restrict_record(record, target, grid) if cfg.fine_data else record


def cmd_invert_density(run, cfg):
    grid, op, rho_base, T, dt = _setup(cfg)
    ex = cfg.experiment
    true_rho1 = float(ex.get('true_rho1', 2.0))
    bounds = ex.get('bounds') or [0.5*true_rho1, 1.5*true_rho1]
    truth = dict(cfg.density, rho1=true_rho1)
    data = cfg.build_initial(op, rho_base)[0]
    spec = cfg.initial_data[:1]
    observed = _observe(cfg, grid, truth, lambda o, r: cfg.build_initial(o, r, spec)[0], T, dt, cfg.gamma)

    summary = []
    for level in ex.get('noise_levels') or [0.0]:
        obs = add_trace_noise(observed, level, cfg.seed) if level else observed
        rec = reconstruct_density(op, obs, rho_base, data, cfg.gamma, T, bounds, dt)
        run.warn(rec.warnings)
        rows = [dict(stage='sample', rho1=x, misfit=y) for x, y in rec.samples]
        rows += [dict(stage='search', rho1=x, misfit=y) for x, y in rec.evaluations[len(rec.samples):]]
        run.save(MisfitSheet, 'misfit_noise_%g' % level, rows)
        summary.append(dict(noise=level, rho1_hat=rec.rho1_hat, misfit=rec.misfit,
                            error=abs(rec.rho1_hat - true_rho1), unimodal=rec.unimodal))
    run.record('density_reconstruction', dict(true_rho1=true_rho1, bounds=bounds, fine_data=cfg.fine_data,
                                              results=summary))


def cmd_invert_initial(run, cfg):
    grid, op, rho, T, dt = _setup(cfg)
    ex = cfg.experiment
    k = int(ex.get('k', 5))
    reg = float(ex.get('reg', 1e-10))
    truth = [float(c) for c in ex.get('true_coefficients') or [0.0, 1.0]]
    modes = [dict(family='modes', f_coefficients=truth)]
    observed = _observe(cfg, grid, cfg.density, lambda o, r: cfg.build_initial(o, r, modes)[0], T, dt, cfg.gamma)
    noise = float(ex.get('noise', 0.0))
    if noise:
        observed = add_trace_noise(observed, noise, cfg.seed)
    rec = reconstruct_initial(op, observed, rho, grid.zeros(), cfg.gamma, T, k, reg, dt)
    run.warn(rec.warnings)
    padded = truth + [0.0]*(k - len(truth))
    rows = [dict(j=j+1, coefficient=c, truth=padded[j], error=abs(c - padded[j])) for j, c in enumerate(rec.coefficients)]
    run.save(CoefficientSheet, 'coefficients', rows)
    run.record('initial_reconstruction', dict(k=k, reg=reg, residual=rec.residual,
                                              rank_deficient=rec.rank_deficient,
                                              singular_values=rec.singular_values,
                                              coefficients=rec.coefficients, truth=padded))


COMMANDS = {
    'simulate': cmd_simulate,
    'resolvent': cmd_resolvent,
    'spectrum': cmd_spectrum,
    'observability': cmd_observability,
    'multiplier': cmd_multiplier,
    'stability': cmd_stability,
    'invert-density': cmd_invert_density,
    'invert-initial': cmd_invert_initial,
}


def run(subcommand, cfg):
    'Run one experiment; the manifest is written even when it fails.'
    r = Run(subcommand, cfg)
    try:
        COMMANDS[subcommand](r, cfg)
    except PlateError as e:
        r.manifest(status='error', error=str(e))
        raise
    vd.status('%s: wrote %d outputs to %s' % (subcommand, len(r.outputs), r.outdir))
    return r.manifest()


def main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(prog='vdplate', description='damped clamped-plate experiments')
    parser.add_argument('subcommand', choices=SUBCOMMANDS)
    parser.add_argument('--config', required=True, help='experiment YAML file')
    parser.add_argument('--out', default=None, help='output directory (overrides output.directory)')
    parser.add_argument('--threads', type=int, default=None, help='worker threads for ensemble members')
    parser.add_argument('--fine-data', action='store_true', help='generate observed data on the 2x refined grid')
    parser.add_argument('--seed', type=int, default=None, help='seed override')
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, seed=args.seed, threads=args.threads, out=args.out, fine_data=args.fine_data)
        run(args.subcommand, cfg)
    except PlateError as e:
        print('vdplate %s: %s' % (args.subcommand, e), file=sys.stderr)
        return 1
    return 0
