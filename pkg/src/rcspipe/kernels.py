"""Backend selection for the gate and sampling kernels.

The compiled ``_ckernels`` extension is used when importable. Setting
``RCSPIPE_BACKEND=python`` forces the NumPy fallback.
"""
import os

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if os.environ.get("RCSPIPE_BACKEND", "").lower() == "python" or compiled_backend is None:
    _impl = python_backend
    BACKEND = "python"
else:
    _impl = compiled_backend
    BACKEND = "cython"

apply_1q = _impl.apply_1q
apply_2q = _impl.apply_2q
cumulative = _impl.cumulative
search_cdf = _impl.search_cdf


def available_backends() -> dict:
    found = {"python": python_backend}
    if compiled_backend is not None:
        found["cython"] = compiled_backend
    return found
