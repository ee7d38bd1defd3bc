'''
Result tables.  Each sheet takes its result object as `source` and yields one
row per record, so the same sheets save as CSV/JSON in batch runs and browse
interactively, with openRow drilling into a member's energy trace.
'''

from visidata import vd, VisiData, Sheet, ItemColumn, AttrColumn, Path

__all__ = ['PlateSheet', 'EnergyTraceSheet', 'BoundaryRecordSheet', 'SpectrumSheet',
           'ResolventSheet', 'ObservabilitySheet', 'MultiplierSheet', 'StabilitySheet',
           'MisfitSheet', 'CoefficientSheet', 'InitialEstimateSheet']


def num(name, key=None, **kwargs):
    return ItemColumn(name, key or name, type=float, **kwargs)


class PlateSheet(Sheet):
    'Sheet over a list of row dicts in `source`, floats formatted with plate_float_fmt.'
    rowtype = 'rows'  # rowdef: dict

    def __init__(self, name, **kwargs):
        super().__init__(name, **kwargs)
        for c in self.columns:
            if c.type is float:
                c.fmtstr = self.options.plate_float_fmt

    def iterload(self):
        yield from self.source


class EnergyTraceSheet(PlateSheet):
    rowtype = 'time levels'  # rowdef: dict from EnergyTrace.rows
    columns = [
        num('t'),
        num('E'),
        num('kinetic'),
        num('bending'),
        num('H_norm'),
        num('energy_norm'),
        num('dissipated'),
        num('work'),
    ]

    def __init__(self, name, source, **kwargs):
        super().__init__(name, source=source.rows, trace=source, **kwargs)


class BoundaryRecordSheet(PlateSheet):
    rowtype = 'time levels'  # rowdef: dict(t, density, J_partial, lap_max, nlap_max)
    columns = [
        num('t'),
        num('density'),
        num('J_partial'),
        num('lap_max'),
        num('nlap_max'),
    ]

    def __init__(self, name, source, **kwargs):
        record = source
        density = record.density()
        rows = []
        partial = 0.0
        for i, t in enumerate(record.times):
            if i:
                partial += 0.5*(density[i] + density[i-1])*(t - record.times[i-1])
            rows.append(dict(t=t, density=density[i], J_partial=partial,
                             lap_max=float(abs(record.trace_lap[i]).max()),
                             nlap_max=float(abs(record.trace_nlap[i]).max())))
        super().__init__(name, source=rows, record=record, **kwargs)


class SpectrumSheet(PlateSheet):
    rowtype = 'eigenpairs'  # rowdef: dict(k, lam, omega, continuum, rel_error)
    columns = [
        ItemColumn('k', type=int),
        num('lam'),
        num('omega'),
        num('continuum'),
        num('rel_error'),
    ]


class ResolventSheet(PlateSheet):
    rowtype = 'resolvent checks'  # rowdef: dict
    columns = [
        num('lam'),
        num('gamma'),
        num('resolvent_bound'),
        num('max_residual'),
        ItemColumn('members', type=int),
        ItemColumn('skipped', type=int),
        num('identity_defect'),
    ]


class ObservabilitySheet(PlateSheet):
    rowtype = 'members'  # rowdef: ObservabilityReport
    columns = [
        AttrColumn('description', width=30),
        AttrColumn('gamma', type=float),
        AttrColumn('T', type=float),
        AttrColumn('E0', type=float),
        AttrColumn('J', type=float),
        AttrColumn('ratio', type=float),
        AttrColumn('T_min', type=float),
        AttrColumn('time_condition_met'),
    ]

    def openRow(self, row):
        'energy trace of this member'
        return EnergyTraceSheet('%s_energy' % self.name, source=row.result.energy)


class MultiplierSheet(PlateSheet):
    rowtype = 'runs'  # rowdef: dict from MultiplierDiagnostics plus run parameters
    columns = [
        ItemColumn('label', width=16),
        num('h'),
        num('dt'),
        num('I1'),
        num('I2'),
        num('I3'),
        num('closure'),
        num('relative_closure'),
        num('I1_identity_residual'),
        num('I2_identity_residual'),
        num('I3_rhs'),
        num('I3_velocity_form'),
        num('boundary_term'),
    ]


class StabilitySheet(PlateSheet):
    rowtype = 'experiments'  # rowdef: StabilityReport
    columns = [
        AttrColumn('label', width=12),
        AttrColumn('contrast', 'rho_diff_inf', type=float),
        AttrColumn('gamma', type=float),
        AttrColumn('T', type=float),
        AttrColumn('rho_diff_inf', type=float),
        AttrColumn('f_diff_H4', type=float),
        AttrColumn('J', type=float),
        AttrColumn('M_observed', type=float),
        AttrColumn('ratio_thm1', type=float),
        AttrColumn('ratio_thm2', type=float),
        AttrColumn('E0_diff', type=float),
        AttrColumn('cross_check', type=float),
        AttrColumn('uniform_bound_ok'),
        AttrColumn('uniform_bound_sharp_ok'),
        AttrColumn('energy_chain_ok'),
        AttrColumn('large_contrast'),
    ]

    def openRow(self, row):
        'energy trace of the difference solution'
        return EnergyTraceSheet('%s_%s_energy' % (self.name, row.label), source=row.energy)


class MisfitSheet(PlateSheet):
    rowtype = 'evaluations'  # rowdef: dict(stage, rho1, misfit)
    columns = [
        ItemColumn('stage'),
        num('rho1'),
        num('misfit'),
    ]


class CoefficientSheet(PlateSheet):
    rowtype = 'modes'  # rowdef: dict(j, coefficient, truth, error)
    columns = [
        ItemColumn('j', type=int),
        num('coefficient'),
        num('truth'),
        num('error'),
    ]


class InitialEstimateSheet(PlateSheet):
    rowtype = 'estimates'  # rowdef: InitialTimeEstimate
    columns = [
        AttrColumn('lhs', type=float),
        AttrColumn('g_norm', type=float),
        AttrColumn('rho_diff_inf', type=float),
        AttrColumn('C1', type=float),
        AttrColumn('flagged'),
        AttrColumn('triangle_rhs', type=float),
    ]


@VisiData.api
def plate_sheet(vd, cls, name, source, **kwargs):
    'Construct and load a result sheet synchronously.'
    vs = cls(name, source=source, **kwargs)
    thread = vs.ensureLoaded()
    if thread:
        vd.sync(thread)
    return vs


@VisiData.api
def save_plate_sheet(vd, vs, outdir, fmt='csv'):
    'Save *vs* as <outdir>/<name>.<fmt>; returns the path written.'
    p = Path(outdir)/('%s.%s' % (vs.name, fmt))
    if fmt == 'json':
        vd.save_json(p, vs)
    else:
        vd.save_csv(p, vs)
    return p
