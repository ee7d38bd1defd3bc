'''
Experiment configuration: a YAML file with blocks grid, density/densities,
initial_data, dynamics, experiment and output, validated into an
ExperimentConfig with messages naming the offending block and field.
'''

import copy
from dataclasses import dataclass, field

import yaml

from visidata import vd, Path

from .biharmonic import spectrum
from .errors import ConfigError
from .fields import INITIAL_FAMILIES, make_density, make_initial_data
from .grid import build_grid, min_observation_time
from .settings import PLATE_OPTIONS

__all__ = ['ExperimentConfig', 'load_config', 'parse_config', 'SUBCOMMANDS']

SUBCOMMANDS = ('simulate', 'resolvent', 'spectrum', 'observability', 'multiplier',
               'stability', 'invert-density', 'invert-initial')

OUTPUT_FORMATS = ('csv', 'json')


def _number(block, d, key, default=None, positive=False, nonneg=False, required=False):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(block, 'missing', key)
        return default
    try:
        x = float(d[key])
    except (TypeError, ValueError):
        raise ConfigError(block, 'expected a number, got %r' % (d[key],), key)
    if positive and not x > 0:
        raise ConfigError(block, 'must be positive, got %g' % x, key)
    if nonneg and x < 0:
        raise ConfigError(block, 'must be nonnegative, got %g' % x, key)
    return x


def _numbers(block, d, key, default=None, nonneg=False):
    if key not in d or d[key] is None:
        return default
    value = d[key]
    if not isinstance(value, (list, tuple)):
        value = [value]
    return [_number(block, {key: v}, key, nonneg=nonneg) for v in value]


def _block(raw, name, required=True, kind=dict):
    if name not in raw or raw[name] is None:
        if required:
            raise ConfigError(name, 'missing block')
        return kind()
    if not isinstance(raw[name], kind):
        raise ConfigError(name, 'expected a %s' % ('mapping' if kind is dict else 'list'))
    return raw[name]


@dataclass
class ExperimentConfig:
    grid: dict
    density: dict
    densities: list
    initial_data: list
    dynamics: dict
    experiment: dict
    output: dict
    seed: int = 0
    fine_data: bool = False
    source: str = ''
    warnings: list = field(default_factory=list)

    def build_grid(self, refine=0):
        g = self.grid
        grid = build_grid(g['dimension'], g['extents'], g['n_nodes'], g.get('x0'))
        for _ in range(refine):
            grid = grid.refined()
        return grid

    def build_density(self, grid, spec=None):
        d = spec if spec is not None else self.density
        return make_density(grid, d.get('rho0', 1.0), d.get('rho1'), d.get('inclusion'))

    def build_initial(self, op, rho, specs=None):
        'InitialData for each entry; random members get seed + index unless they carry their own.'
        out = []
        for i, spec in enumerate(specs if specs is not None else self.initial_data):
            params = dict(spec)
            family = params.pop('family')
            if family == 'random':
                params.setdefault('seed', self.seed + i)
            if family == 'eigenmodes':
                count = int(params.pop('count', 5))
                pairs = spectrum(op, rho, count)
                out.extend(make_initial_data(op, 'eigenmode', rho=rho, eigenpairs=pairs, k=k, **params)
                           for k in range(1, count + 1))
                continue
            out.append(make_initial_data(op, family, rho=rho, **params))
        return out

    @property
    def gamma(self):
        return self.dynamics.get('gamma', 0.0)

    def horizon(self, grid, rho):
        'T from dynamics.T, or T_factor times the minimal observation time; warns when T <= T_min.'
        T_min = min_observation_time(grid, rho.rho_min)
        T = self.dynamics.get('T')
        if T is None:
            T = self.dynamics.get('T_factor', 1.1)*T_min
        if not T > T_min:
            msg = 'T=%g does not exceed the minimal observation time %g' % (T, T_min)
            if msg not in self.warnings:
                vd.warning(msg)
                self.warnings.append(msg)
        return T

    @property
    def dt(self):
        return self.dynamics.get('dt')

    def resolved(self):
        return dict(grid=self.grid, density=self.density, densities=self.densities,
                    initial_data=self.initial_data, dynamics=self.dynamics,
                    experiment=self.experiment, output=self.output,
                    seed=self.seed, fine_data=self.fine_data, source=self.source)


def _check_grid(g):
    dim = g.get('dimension')
    if dim not in (1, 2):
        raise ConfigError('grid', 'must be 1 or 2, got %r' % (dim,), 'dimension')
    for key in ('extents', 'n_nodes'):
        if key not in g:
            raise ConfigError('grid', 'missing', key)
        value = g[key] if isinstance(g[key], (list, tuple)) else [g[key]]
        if len(value) != dim:
            raise ConfigError('grid', 'needs %d entries, got %d' % (dim, len(value)), key)
        g[key] = value
    g['extents'] = [_number('grid', {'extents': L}, 'extents', positive=True) for L in g['extents']]
    try:
        g['n_nodes'] = [int(n) for n in g['n_nodes']]
    except (TypeError, ValueError):
        raise ConfigError('grid', 'node counts must be integers', 'n_nodes')
    if 'x0' in g and g['x0'] is not None:
        x0 = g['x0'] if isinstance(g['x0'], (list, tuple)) else [g['x0']]
        g['x0'] = [_number('grid', {'x0': x}, 'x0') for x in x0]


def _check_density(block, d):
    if not isinstance(d, dict):
        raise ConfigError(block, 'expected a mapping')
    _number(block, d, 'rho0', positive=True)
    _number(block, d, 'rho1', positive=True)
    inc = d.get('inclusion')
    if inc is not None:
        if not isinstance(inc, dict) or not ('interval' in inc or ('center' in inc and 'radius' in inc)):
            raise ConfigError(block, 'needs center and radius, or interval', 'inclusion')


def _check_initial(specs):
    for i, spec in enumerate(specs):
        if not isinstance(spec, dict) or 'family' not in spec:
            raise ConfigError('initial_data', 'entry %d needs a family' % i, 'family')
        if spec['family'] not in INITIAL_FAMILIES + ('eigenmodes',):
            raise ConfigError('initial_data', 'unknown family %r in entry %d' % (spec['family'], i), 'family')


def parse_config(raw, source='', seed=None, threads=None, out=None, fine_data=False):
    'Validate a parsed YAML mapping; CLI overrides win over the file.'
    if not isinstance(raw, dict):
        raise ConfigError('config', 'top level must be a mapping')
    raw = copy.deepcopy(raw)

    grid = _block(raw, 'grid')
    _check_grid(grid)

    density = _block(raw, 'density', required=False) or {'rho0': 1.0}
    _check_density('density', density)
    densities = _block(raw, 'densities', required=False, kind=list)
    for d in densities:
        _check_density('densities', d)

    initial = raw.get('initial_data') or [{'family': 'eigenmode', 'k': 1}]
    if isinstance(initial, dict):
        initial = [initial]
    _check_initial(initial)

    dynamics = _block(raw, 'dynamics', required=False)
    dynamics['gamma'] = _number('dynamics', dynamics, 'gamma', 0.0, nonneg=True)
    for key in ('T', 'T_factor', 'dt'):
        if key in dynamics:
            dynamics[key] = _number('dynamics', dynamics, key, positive=True)
    dynamics['snapshot_stride'] = int(dynamics.get('snapshot_stride', 0) or 0)
    if dynamics['snapshot_stride'] < 0:
        raise ConfigError('dynamics', 'must be nonnegative', 'snapshot_stride')

    experiment = _block(raw, 'experiment', required=False)
    for key in ('gammas', 'lambdas', 'contrasts', 'noise_levels'):
        if key in experiment:
            experiment[key] = _numbers('experiment', experiment, key, nonneg=True)
    if 'bounds' in experiment:
        b = _numbers('experiment', experiment, 'bounds', nonneg=True)
        if len(b) != 2:
            raise ConfigError('experiment', 'needs [lo, hi]', 'bounds')
        experiment['bounds'] = b

    output = _block(raw, 'output', required=False)
    if out is not None:
        output['directory'] = str(out)
    output.setdefault('directory', 'plate-out')
    formats = output.get('formats') or ['csv']
    if isinstance(formats, str):
        formats = [formats]
    bad = [f for f in formats if f not in OUTPUT_FORMATS]
    if bad:
        raise ConfigError('output', 'unknown formats %s' % bad, 'formats')
    output['formats'] = formats

    if seed is None:
        seed = raw.get('seed', 0)
    try:
        seed = int(seed)
    except (TypeError, ValueError):
        raise ConfigError('seed', 'must be an integer, got %r' % (seed,))

    if threads is not None:
        vd.options.plate_threads = int(threads)
    options = _block(raw, 'options', required=False)
    for name in options:
        if name not in PLATE_OPTIONS:
            raise ConfigError('options', 'unknown option %r; choose from %s' % (name, ', '.join(PLATE_OPTIONS)), name)
    for name, value in options.items():
        setattr(vd.options, name, value)

    return ExperimentConfig(grid=grid, density=density, densities=densities, initial_data=initial,
                            dynamics=dynamics, experiment=experiment, output=output,
                            seed=seed, fine_data=bool(fine_data or experiment.get('fine_data')),
                            source=str(source))


def load_config(path, **overrides):
    p = Path(path)
    if not p.exists():
        raise ConfigError('config', 'file %s not found' % p)
    try:
        with p.open_text() as fp:
            raw = yaml.safe_load(fp)
    except yaml.YAMLError as e:
        raise ConfigError('config', 'cannot parse %s: %s' % (p, e))
    return parse_config(raw, source=str(p), **overrides)
