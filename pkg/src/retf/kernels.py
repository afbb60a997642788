"""Backend selection for the trajectory kernels.

The compiled extension is used when it was built; otherwise, or when
``RETF_PURE_PYTHON`` is set to a non-empty value other than ``0``, the numpy
versions are used.
"""
import os

from . import _kernels_py

_force_python = os.environ.get("RETF_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
bias_loss_sweep = _impl.bias_loss_sweep
reflex_profile = _impl.reflex_profile


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True
