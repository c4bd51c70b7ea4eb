"""Tabular laboratory for survival-weighted constrained RL.

The heavy lifting lives in the compiled extension; this package re-exports
its surface. Installed wheels place the extension inside the package, while
in-tree CMake builds put it on PYTHONPATH directly.
"""

try:
    from ._core import *  # noqa: F401,F403
    from . import _core as core  # noqa: F401
except ImportError:  # in-tree build
    from _core import *  # noqa: F401,F403
    import _core as core  # noqa: F401

__version__ = "0.1.0"
