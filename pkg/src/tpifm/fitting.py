"""Least-squares fits for the model's two-parameter forms.

``exp``    y = A * exp(-k * x)       (delay/stall sub-models, JND -> v2 map)
``power``  y = rho * x ** (-sigma)   (JND -> v4 map)
``weights`` the linear fusion weights (v5, v6)

Nonlinear fits are initialised by a straight-line fit in log space and then
refined in linear space with Levenberg-Marquardt (diagonal scaling, damping
x10 on a rejected step and /10 on an accepted one).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import InputError, UnderdeterminedError

GTOL = 1e-10
MAX_ITER = 200


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).ravel()
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if x.shape != y.shape:
            raise InputError("x and y must have the same length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InputError("dataset contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64).ravel()
            if w.shape != x.shape or np.any(~(w > 0)):
                raise InputError("weights must be positive, one per point")
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float]], weights=None) -> "Dataset":
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return cls(pts[:, 0], pts[:, 1], weights)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def w(self) -> np.ndarray:
        return np.ones_like(self.x) if self.weights is None else self.weights


@dataclass(frozen=True)
class FitResult:
    params: tuple[float, ...]
    sse: float
    r_square: float
    rmse: float
    iterations: int
    converged: bool
    names: tuple[str, ...] = ()
    gradient_norm: float = 0.0
    n: int = 0
    excluded: tuple[int, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "params": dict(zip(self.names, self.params)) if self.names else list(self.params),
            "sse": self.sse,
            "r_square": self.r_square,
            "rmse": self.rmse,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=False)


def _quality(resid: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    sse = float(np.sum(w * resid * resid))
    ybar = float(np.sum(w * y) / np.sum(w))
    sst = float(np.sum(w * (y - ybar) ** 2))
    if sst > 0:
        r2 = 1.0 - sse / sst
    else:
        r2 = 1.0 if sse <= 1e-20 * max(1.0, float(np.sum(w * y * y))) else 0.0
    return sse, r2, math.sqrt(sse / y.size)


# -- model forms --------------------------------------------------------------

def _exp_f(p, x):
    return p[0] * np.exp(-p[1] * x)


def _exp_jac(p, x):
    e = np.exp(-p[1] * x)
    return np.column_stack([e, -p[0] * x * e])


def _pow_f(p, x):
    return p[0] * x ** (-p[1])


def _pow_jac(p, x):
    e = x ** (-p[1])
    return np.column_stack([e, -p[0] * np.log(x) * e])


def _loglinear_init(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Fit ln y = ln a - b t; returns (a, b)."""
    slope, intercept = np.polyfit(t, np.log(y), 1)
    return float(math.exp(intercept)), float(-slope)


def _grid_init(t: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """Scan the rate ``b`` and solve the amplitude in closed form."""
    span = float(np.ptp(t)) or 1.0
    best = (math.inf, 0.0, 0.0)
    for b in np.linspace(-20.0, 20.0, 4001) / span:
        phi = np.exp(-b * t)
        denom = float(np.sum(w * phi * phi))
        if denom == 0 or not math.isfinite(denom):
            continue
        a = float(np.sum(w * y * phi) / denom)
        s = float(np.sum(w * (y - a * phi) ** 2))
        if s < best[0]:
            best = (s, a, float(b))
    return best[1], best[2]


def levenberg_marquardt(f: Callable, jac: Callable, x: np.ndarray, y: np.ndarray,
                        w: np.ndarray, p0, *, gtol: float = GTOL, max_iter: int = MAX_ITER
                        ) -> tuple[np.ndarray, int, bool, float]:
    """Minimise ``sum(w * (y - f(p, x))**2)``; returns (p, iterations, converged, |g|).

    ``|g|`` is the max-norm of ``J^T W r``; convergence means ``|g|`` is below
    ``gtol`` or below the float64 rounding floor of that product, whichever is
    larger. Near the optimum the SSE stops resolving in float64, so a step that
    leaves it flat is still taken when it shrinks the gradient.
    """
    eps = np.finfo(np.float64).eps

    def grad(p, r):
        J = jac(p, x)
        g = J.T @ (w * r)
        floor = 16 * eps * len(r) * float(np.max(np.abs(J).T @ np.abs(w * r)))
        return g, float(np.max(np.abs(g))), max(gtol, floor)

    p = np.asarray(p0, dtype=np.float64).copy()
    r = y - f(p, x)
    sse = float(np.sum(w * r * r))
    g, gnorm, tol = grad(p, r)
    lam = 1e-3
    it = 0
    while it < max_iter:
        if gnorm < tol:
            return p, it, True, gnorm
        J = jac(p, x)
        H = J.T @ (w[:, None] * J)
        d = np.diag(H).copy()
        if not np.all(np.isfinite(H)) or np.max(d) <= 0:
            return p, it, False, gnorm
        d = np.maximum(d, 1e-15 * np.max(d))
        it += 1
        while True:
            try:
                step = np.linalg.solve(H + lam * np.diag(d), g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                p_new = p + step
                r_new = y - f(p_new, x)
                sse_new = float(np.sum(w * r_new * r_new))
                if math.isfinite(sse_new):
                    g_new, gnorm_new, tol_new = grad(p_new, r_new)
                    flat = sse_new <= sse * (1.0 + 1e-14) and gnorm_new < gnorm
                    if sse_new < sse or flat:
                        p, r, sse, g, gnorm, tol = p_new, r_new, sse_new, g_new, gnorm_new, tol_new
                        lam = max(lam / 10.0, 1e-12)
                        break
            lam *= 10.0
            if lam > 1e16:
                return p, it, gnorm < tol, gnorm
    return p, it, gnorm < tol, gnorm


def _check_xy(data: Dataset, min_points: int = 2) -> None:
    if data.n < min_points:
        raise UnderdeterminedError(f"need at least {min_points} points, got {data.n}")
    if np.ptp(data.x) == 0:
        raise UnderdeterminedError("x values are all equal")


def _finish(p, it, conv, gnorm, f, data: Dataset, names) -> FitResult:
    resid = data.y - f(p, data.x)
    sse, r2, rm = _quality(resid, data.y, data.w)
    return FitResult(tuple(float(v) for v in p), sse, r2, rm, it, conv, names, gnorm, data.n)


def fit_exp_decay(data: Dataset, p0=None) -> FitResult:
    """Fit ``y = A * exp(-k x)``; params are ``(A, k)``."""
    _check_xy(data)
    if p0 is None:
        if np.all(data.y > 0):
            p0 = _loglinear_init(data.x, data.y)
        else:
            p0 = _grid_init(data.x, data.y, data.w)
    p, it, conv, g = levenberg_marquardt(_exp_f, _exp_jac, data.x, data.y, data.w, p0)
    return _finish(p, it, conv, g, _exp_f, data, ("A", "k"))


def fit_power_law(data: Dataset, p0=None) -> FitResult:
    """Fit ``y = rho * x ** -sigma``; params are ``(rho, sigma)``."""
    if np.any(data.x <= 0):
        raise InputError("power-law fit needs all x > 0")
    _check_xy(data)
    t = np.log(data.x)
    if p0 is None:
        if np.all(data.y > 0):
            p0 = _loglinear_init(t, data.y)
        else:
            p0 = _grid_init(t, data.y, data.w)
    p, it, conv, g = levenberg_marquardt(_pow_f, _pow_jac, data.x, data.y, data.w, p0)
    return _finish(p, it, conv, g, _pow_f, data, ("rho", "sigma"))


def fit_jnd_exp_map(data: Dataset) -> FitResult:
    """Fit ``v2 = alpha * exp(-beta * jnd)`` from (JND seconds, v2 per ms) pairs."""
    res = fit_exp_decay(data)
    return FitResult(res.params, res.sse, res.r_square, res.rmse, res.iterations,
                     res.converged, ("alpha", "beta"), res.gradient_norm, res.n)


def _weights_solve(qd, qs, mos):
    X = 4.0 * np.column_stack([5.0 - qd, 5.0 - qs])
    z = 5.0 - mos
    if X.shape[0] < 2 or np.linalg.matrix_rank(X) < 2:
        raise UnderdeterminedError(
            "weight fit is underdetermined: need two records with independent impairments"
        )
    p, *_ = np.linalg.lstsq(X, z, rcond=None)
    return p, X, z


def fit_combined_weights(records) -> FitResult:
    """Least-squares weights ``(v5, v6)`` of the fusion step.

    Records whose unclamped prediction falls outside [1, 5] are dropped and the
    system is solved once more; their indices end up in ``excluded``.
    """
    arr = np.asarray(records, dtype=np.float64).reshape(-1, 3)
    qd, qs, mos = arr[:, 0], arr[:, 1], arr[:, 2]
    p, X, z = _weights_solve(qd, qs, mos)
    iterations = 1
    raw = 5.0 - X @ p
    keep = (raw >= 1.0) & (raw <= 5.0)
    excluded = tuple(int(i) for i in np.flatnonzero(~keep))
    if excluded:
        p, X, z = _weights_solve(qd[keep], qs[keep], mos[keep])
        iterations = 2
        mos = mos[keep]
    resid = z - X @ p
    g = float(np.max(np.abs(X.T @ resid)))
    sse, r2, rm = _quality(resid, mos, np.ones_like(mos))
    return FitResult(tuple(float(v) for v in p), sse, r2, rm, iterations, True,
                     ("v5", "v6"), g, mos.size, excluded)


# -- brute-force reference --------------------------------------------------------

@dataclass(frozen=True)
class GridOptimum:
    a: float
    b: float
    sse: float
    da: float
    db: float


def grid_search(data: Dataset, form: str, a_hat: float, b_hat: float, n: int = 2000,
                *, use_numba: bool | None = None) -> GridOptimum:
    """Exhaustive SSE minimum over ``a in [a_hat/2, 2 a_hat]``, ``b in [0, 4 b_hat]``."""
    kform = {"exp": kernels.EXP_FORM, "power": kernels.POWER_FORM}[form]
    a_grid = np.linspace(0.5 * a_hat, 2.0 * a_hat, n)
    b_grid = np.linspace(0.0, 4.0 * b_hat, n)
    if data.weights is not None:
        raise InputError("grid search supports unweighted data only")
    sse = kernels.sse_grid(data.x, data.y, a_grid, b_grid, kform, use_numba=use_numba)
    i, j = np.unravel_index(int(np.argmin(sse)), sse.shape)
    return GridOptimum(float(a_grid[i]), float(b_grid[j]), float(sse[i, j]),
                       float(a_grid[1] - a_grid[0]), float(b_grid[1] - b_grid[0]))


# -- CSV I/O ------------------------------------------------------------------------

def _read_csv(text: str, header: tuple[str, ...]) -> np.ndarray:
    rd = csv.reader(io.StringIO(text))
    rows = [r for r in rd if r and any(c.strip() for c in r)]
    if not rows or tuple(c.strip() for c in rows[0]) != header:
        raise InputError(f"CSV header must be {','.join(header)}")
    try:
        vals = [[float(c) for c in r] for r in rows[1:]]
    except ValueError as exc:
        raise InputError(f"non-numeric CSV value: {exc}") from None
    if any(len(r) != len(header) for r in vals):
        raise InputError(f"every row needs {len(header)} columns")
    return np.asarray(vals, dtype=np.float64).reshape(-1, len(header))


def read_xy_csv(text: str) -> Dataset:
    arr = _read_csv(text, ("x", "y"))
    return Dataset(arr[:, 0], arr[:, 1])


def read_weights_csv(text: str) -> np.ndarray:
    return _read_csv(text, ("qd", "qs", "mos"))


def write_xy_csv(x, y) -> str:
    lines = ["x,y"] + [f"{a!r},{b!r}" for a, b in zip(map(float, x), map(float, y))]
    return "\n".join(lines) + "\n"
