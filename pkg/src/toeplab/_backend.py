"""Kernel backend selection.

The compiled module is used when it imports; otherwise the NumPy fallback.
Set ``TOEPLAB_BACKEND=python`` to force the fallback.
"""

import os

from toeplab import _pykernels

BACKENDS = {"python": _pykernels}
try:
    from toeplab import _ckernels

    BACKENDS["cython"] = _ckernels
except ImportError:  # pragma: no cover - depends on build
    _ckernels = None

_requested = os.environ.get("TOEPLAB_BACKEND", "").strip().lower()
if _requested == "python" or "cython" not in BACKENDS:
    NAME = "python"
else:
    NAME = "cython"

kernels = BACKENDS[NAME]


def get(name):
    """Return the kernel module for ``name`` ('cython' or 'python')."""
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available; have {sorted(BACKENDS)}") from None


__all__ = ["BACKENDS", "NAME", "kernels", "get"]
