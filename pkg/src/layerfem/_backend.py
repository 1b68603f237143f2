"""Kernel backend selection.

The env var LAYERFEM_BACKEND picks the hot-kernel implementation:

* ``numba`` - jitted loops (error if numba is not importable)
* ``numpy`` - pure-numpy fallback
* ``auto``  - numba when importable, else numpy (default)

Call sites resolve the backend per call so tests and the bench command can
switch within one process.
"""
from __future__ import annotations

import os

from . import _kernels_numpy

_ENV_VAR = "LAYERFEM_BACKEND"

try:
    from . import _kernels_numba
except ImportError:  # pragma: no cover - depends on the environment
    _kernels_numba = None


def available_backends() -> tuple[str, ...]:
    if _kernels_numba is not None:
        return ("numba", "numpy")
    return ("numpy",)


def resolve_backend(override: str | None = None) -> str:
    """Return 'numba' or 'numpy' from the override or the environment."""
    mode = (override or os.environ.get(_ENV_VAR, "auto")).lower()
    if mode == "auto":
        return "numba" if _kernels_numba is not None else "numpy"
    if mode == "numba":
        if _kernels_numba is None:
            raise RuntimeError(
                f"{_ENV_VAR}=numba requested but numba is not importable")
        return "numba"
    if mode == "numpy":
        return "numpy"
    raise ValueError(
        f"unknown backend {mode!r}; expected numba, numpy or auto")


def get_kernels(backend: str | None = None):
    """Return the kernel module for the resolved backend."""
    name = resolve_backend(backend)
    return _kernels_numba if name == "numba" else _kernels_numpy
