"""Selection of the compiled core with a pure NumPy fallback.

``import ibimpb.backend as backend; backend.core`` yields the module
implementing the hot kernels.  The compiled extension is preferred;
setting ``IBIMPB_FORCE_PYTHON=1`` in the environment forces the NumPy
twin (useful for debugging and for the backend benchmark).
"""

import os

from . import _core_py

if os.environ.get("IBIMPB_FORCE_PYTHON", "") == "1":
    core = _core_py
    _COMPILED = False
else:
    try:
        from . import _core as _core_ext

        core = _core_ext
        _COMPILED = True
    except ImportError:
        core = _core_py
        _COMPILED = False


def core_backend_name():
    """Name of the active hot-kernel implementation."""
    return "compiled" if _COMPILED else "python"


def get_core(force=None):
    """Return a core module explicitly (``'compiled'``, ``'python'`` or None)."""
    if force is None:
        return core
    if force == "python":
        return _core_py
    if force == "compiled":
        if not _COMPILED:
            raise ImportError("compiled core (ibimpb._core) is not available")
        from . import _core as _core_ext

        return _core_ext
    raise ValueError(f"unknown core backend {force!r}")
