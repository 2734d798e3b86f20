"""Kernel dispatch: compiled extension when importable, NumPy otherwise.

Set ``QSL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from qsl import _pykernels

BACKEND = "python"
apply_unitaries = _pykernels.apply_unitaries
fixed_reference_trace = _pykernels.fixed_reference_trace

if os.environ.get("QSL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from qsl import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        apply_unitaries = _ckernels.apply_unitaries
        fixed_reference_trace = _ckernels.fixed_reference_trace


def backends():
    """Mapping of available backend name -> kernel module."""
    found = {"python": _pykernels}
    try:
        from qsl import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
