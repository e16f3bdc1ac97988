"""Backend selection for the numeric kernels.

Set ``TPIFM_DISABLE_NUMBA=1`` to force the pure-numpy path. The numba path is
also skipped when numba cannot be imported.
"""
from __future__ import annotations

import os

_FLAG = "TPIFM_DISABLE_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if _numba is None:
        return func
    return _numba.njit(cache=True, nogil=True)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
