from .errors import *
from .expr import *
from .geometry import *
from .dynamics import *
from .constraints import *
from .timeconstraint import *
from .frames import *
from .integrate import *
from .config import *
from .expr import __copyright__
