"""Pick the compiled kernels when available, else the numpy fallback.

Set ``ACORSIS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

kernels = _fallback
NAME = "python"

if os.environ.get("ACORSIS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _kernels
        NAME = "cython"

HAVE_COMPILED = NAME == "cython"


def get(name=None):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
