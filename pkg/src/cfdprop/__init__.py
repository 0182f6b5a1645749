"""CFDProp: recurrent video super-resolution on a numpy autograd core."""
from . import conf
__version__ = conf.Version
__VERSION__ = conf.Version
