"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``FIBERLAB_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("FIBERLAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
transport_simplex = _impl.transport_simplex
longest_paths = _impl.longest_paths


def available_backends() -> dict:
    """Map backend name to module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
