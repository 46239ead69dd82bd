"""Kernel backend selection.

The compiled extension is preferred; the numpy interpreter is the fallback.
Set SPLITGEO_PURE=1 to force the fallback (used by the benchmark and for
debugging).
"""

import os

from . import _kernel_py

if os.environ.get("SPLITGEO_PURE"):
    _impl = _kernel_py
else:
    try:
        from . import _kernel as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernel_py

BACKEND = _impl.BACKEND
run_program = _impl.run_program
first_bad_op = _kernel_py.first_bad_op
