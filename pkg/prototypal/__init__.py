################################################################################
# Module: __init__.py
# Description: Prototypal: select weighted prototypes that summarize a target
#              dataset by sparse-support optimal transport
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################

# Version of the package
__version__ = '0.1.0'

from .utils import *
from .data import *
from .core import *
from .selectors import *
from .transport import *
from .mmd import *
from .evaluation import *
