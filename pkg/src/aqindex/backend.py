"""Kernel backend selection.

The hot numeric loops (bounded-simplex projection, isotonic regression,
Dykstra sweeps, projected gradient descent, per-pair network backprop) exist
twice: a numba-jitted implementation and a pure-numpy fallback with identical
semantics.  The active backend is picked once per process:

    AQINDEX_BACKEND=numba   force the jitted kernels (error if numba missing)
    AQINDEX_BACKEND=numpy   force the fallback
    unset / auto            numba when importable, else numpy

``benchmarks/bench_backends.py`` times the two side by side.
"""

from __future__ import annotations

import os
import warnings

__all__ = ["get_backend", "backend_name", "available_backends"]

_ENV_VAR = "AQINDEX_BACKEND"
_cache: dict[str, object] = {}


def _load(name: str):
    if name in _cache:
        return _cache[name]
    if name == "numpy":
        from . import _kernels_numpy as mod
    elif name == "numba":
        from . import _kernels_numba as mod
    else:
        raise ValueError(f"unknown backend {name!r} (use 'numba' or 'numpy')")
    _cache[name] = mod
    return mod


def available_backends() -> list[str]:
    names = ["numpy"]
    try:
        import numba  # noqa: F401
        names.insert(0, "numba")
    except ImportError:
        pass
    return names


def get_backend(name: str | None = None):
    """Return the kernel module for `name`, or the process default."""
    if name is None:
        name = os.environ.get(_ENV_VAR, "auto").lower()
    if name == "auto":
        try:
            return _load("numba")
        except ImportError:
            warnings.warn("numba unavailable, falling back to numpy kernels")
            return _load("numpy")
    return _load(name)


def backend_name(backend=None) -> str:
    backend = backend or get_backend()
    return backend.NAME
