"""Backend selection for the hot loops.

The compiled extension is preferred.  Set ``HOLOCRIT_BACKEND=python`` to
force the numpy implementation (handy for parity checks and debugging).
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def get_backend(name=None):
    """Kernel module for ``name`` (``"cython"`` or ``"python"``); default per environment."""
    if name is None:
        name = os.environ.get("HOLOCRIT_BACKEND", "cython" if _ckernels is not None else "python")
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    return BACKENDS[name]


def backend_name(name=None) -> str:
    mod = get_backend(name)
    return "cython" if mod is _ckernels else "python"
