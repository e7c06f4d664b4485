"""Box-Cox transformation cure rate model with a gradient-free SQH optimizer."""

from ._bctcure import *  # noqa: F401,F403
from ._bctcure import __doc__  # noqa: F401

__version__ = "0.1.0"
