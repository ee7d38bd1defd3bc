'Damped clamped-plate wave lab: discretization, dynamics, observability and inversion experiments.'

__version__ = '0.1.1'

from visidata import vd

import vdplate.settings  # plate_* options

from .errors import *
from .grid import *
from .fields import *
from .biharmonic import *
from .elliptic import *
from .evolution import *
from .snapshots import *
from .observability import *
from .inversion import *
from .sheets import *
from .config import *

vd.addGlobals(globals())
