"""Vectorised hot paths.

Every kernel has two implementations: an explicit loop compiled with numba and
a broadcasting numpy version. Both take flat float64 arrays of equal length
(plus scalars) and must agree to rounding. The public wrappers broadcast their
inputs, dispatch on :data:`tpifm._accel.USE_NUMBA` and restore the shape.
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit

EXP_FORM = 0
POWER_FORM = 1


# -- loop kernels (numba) ---------------------------------------------------

@njit
def _loop_exp_decay_clamped(x, scale, rate, out):
    for i in range(x.shape[0]):
        q = scale[i] * math.exp(-rate[i] * x[i])
        if q > 5.0:
            q = 5.0
        elif q < 1.0:
            q = 1.0
        out[i] = q
    return out


@njit
def _loop_combined_clamped(qd, qs, v5, v6, out):
    for i in range(qd.shape[0]):
        q = 4.0 * (1.0 - v5 * (5.0 - qd[i]) - v6 * (5.0 - qs[i])) + 1.0
        if q > 5.0:
            q = 5.0
        elif q < 1.0:
            q = 1.0
        out[i] = q
    return out


@njit
def _loop_tpifm(delay_ms, rs, v1, v2, v3, v4, v5, v6, out):
    for i in range(delay_ms.shape[0]):
        qd = v1[i] * math.exp(-v2[i] * delay_ms[i])
        qd = min(max(qd, 1.0), 5.0)
        qs = v3[i] * math.exp(-v4[i] * rs[i])
        qs = min(max(qs, 1.0), 5.0)
        q = 4.0 * (1.0 - v5 * (5.0 - qd) - v6 * (5.0 - qs)) + 1.0
        out[i] = min(max(q, 1.0), 5.0)
    return out


@njit
def _loop_sse_grid(x, y, a_grid, b_grid, form, out):
    n = x.shape[0]
    if form == 1:
        logx = np.log(x)
    else:
        logx = x
    for j in range(b_grid.shape[0]):
        b = b_grid[j]
        basis = np.empty(n)
        for p in range(n):
            if form == 1:
                basis[p] = math.exp(-b * logx[p])
            else:
                basis[p] = math.exp(-b * x[p])
        for i in range(a_grid.shape[0]):
            a = a_grid[i]
            s = 0.0
            for p in range(n):
                r = y[p] - a * basis[p]
                s += r * r
            out[i, j] = s
    return out


# -- numpy kernels ----------------------------------------------------------

def _np_exp_decay_clamped(x, scale, rate, out):
    np.clip(scale * np.exp(-rate * x), 1.0, 5.0, out=out)
    return out


def _np_combined_clamped(qd, qs, v5, v6, out):
    np.clip(4.0 * (1.0 - v5 * (5.0 - qd) - v6 * (5.0 - qs)) + 1.0, 1.0, 5.0, out=out)
    return out


def _np_tpifm(delay_ms, rs, v1, v2, v3, v4, v5, v6, out):
    qd = np.clip(v1 * np.exp(-v2 * delay_ms), 1.0, 5.0)
    qs = np.clip(v3 * np.exp(-v4 * rs), 1.0, 5.0)
    return _np_combined_clamped(qd, qs, v5, v6, out)


def _np_sse_grid(x, y, a_grid, b_grid, form, out):
    t = np.log(x) if form == POWER_FORM else x
    out[:] = 0.0
    for xp, yp in zip(t, y):
        r = yp - np.outer(a_grid, np.exp(-b_grid * xp))
        out += r * r
    return out


# -- dispatch -----------------------------------------------------------------

def _flat(*arrays):
    b = np.broadcast_arrays(*[np.asarray(a, dtype=np.float64) for a in arrays])
    shape = b[0].shape
    return shape, [np.ascontiguousarray(a).ravel() for a in b]


def exp_decay_clamped(x, scale, rate, *, use_numba: bool | None = None):
    """``clip(scale * exp(-rate * x), 1, 5)`` elementwise with broadcasting."""
    shape, (x, scale, rate) = _flat(x, scale, rate)
    out = np.empty_like(x)
    fn = _loop_exp_decay_clamped if _pick(use_numba) else _np_exp_decay_clamped
    return fn(x, scale, rate, out).reshape(shape)


def combined_clamped(qd, qs, v5: float, v6: float, *, use_numba: bool | None = None):
    shape, (qd, qs) = _flat(qd, qs)
    out = np.empty_like(qd)
    fn = _loop_combined_clamped if _pick(use_numba) else _np_combined_clamped
    return fn(qd, qs, float(v5), float(v6), out).reshape(shape)


def tpifm_batch(delay_ms, rs, v1, v2, v3, v4, v5: float, v6: float, *,
                use_numba: bool | None = None):
    """Fused delay + stall + combination over broadcast arrays.

    ``v1..v4`` may be per-element (generalised mode with a JND per sample).
    """
    shape, (d, r, a1, a2, a3, a4) = _flat(delay_ms, rs, v1, v2, v3, v4)
    out = np.empty_like(d)
    if _pick(use_numba):
        _loop_tpifm(d, r, a1, a2, a3, a4, float(v5), float(v6), out)
    else:
        _np_tpifm(d, r, a1, a2, a3, a4, float(v5), float(v6), out)
    return out.reshape(shape)


def sse_grid(x, y, a_grid, b_grid, form: int = EXP_FORM, *, use_numba: bool | None = None):
    """Sum of squared residuals of ``a * basis(b, x)`` over an (a, b) grid.

    ``form`` selects ``exp(-b x)`` (EXP_FORM) or ``x ** -b`` (POWER_FORM).
    Returns an array of shape ``(len(a_grid), len(b_grid))``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    a_grid = np.ascontiguousarray(a_grid, dtype=np.float64)
    b_grid = np.ascontiguousarray(b_grid, dtype=np.float64)
    if form == POWER_FORM and np.any(x <= 0):
        raise ValueError("power-law grid needs x > 0")
    out = np.empty((a_grid.size, b_grid.size))
    fn = _loop_sse_grid if _pick(use_numba) else _np_sse_grid
    return fn(x, y, a_grid, b_grid, int(form), out)


def _pick(use_numba: bool | None) -> bool:
    if use_numba is None:
        return _accel.USE_NUMBA
    if use_numba and not _accel.HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    return use_numba
