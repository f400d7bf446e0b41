"""Python bindings for the crorl C++ core."""

from ._crorl import *  # noqa: F401,F403
from ._crorl import __doc__  # noqa: F401
