from visidata import ExpectedException

__all__ = ['PlateError', 'GridError', 'DensityError', 'FieldShapeError',
           'InitialDataError', 'SolverBreakdown', 'SpectrumError',
           'EnsembleError', 'SearchError', 'TimeStepError', 'ConfigError']


class PlateError(ExpectedException):
    pass

class GridError(PlateError):
    pass

class DensityError(PlateError):
    pass

class FieldShapeError(PlateError):
    pass

class InitialDataError(PlateError):
    pass

class SpectrumError(PlateError):
    pass

class EnsembleError(PlateError):
    pass

class TimeStepError(PlateError):
    pass

class SearchError(PlateError):
    pass


class SolverBreakdown(PlateError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class ConfigError(PlateError):
    'Configuration problem, naming the block (and field) at fault.'
    def __init__(self, block, msg, field=None):
        self.block = block
        self.field = field
        where = block + ('.' + field if field else '')
        super().__init__('%s: %s' % (where, msg))
