"""Python bindings for the avbench C++ core."""

from ._avbench import *  # noqa: F401,F403
from ._avbench import __version__, Error  # noqa: F401
