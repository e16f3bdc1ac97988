"""Closed-form fluency scores under delay and stalling.

Scalar functions validate their inputs and return plain floats; the ``*_batch``
helpers evaluate many conditions at once through :mod:`tpifm.kernels`.
Delays are in milliseconds throughout; the seconds-based baseline2 form
converts internally when reached through :func:`predict`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import InputError, UnsupportedTaskError
from .params import (
    BASELINES,
    GENERALIZED,
    Baseline2Params,
    Baseline3Params,
    CombinedWeights,
    DelayModelParams,
    GeneralizedParams,
    StallModelParams,
    TaskProfile,
    per_task_params,
)
from .params import task as task_profile

MOS_MIN = 1.0
MOS_MAX = 5.0


class Mode(str, Enum):
    PER_TASK = "per_task"
    GENERALIZED = "generalized"


MODELS = ("tpifm", "baseline1", "baseline2", "baseline3")


@dataclass(frozen=True)
class ImpairmentCondition:
    delay_ms: float
    stall_count: int = 0
    avg_stall_ms: float = 0.0
    interaction_ms: float = 9000.0

    def __post_init__(self):
        _nonneg("delay_ms", self.delay_ms)
        if isinstance(self.stall_count, bool) or int(self.stall_count) != self.stall_count \
                or self.stall_count < 0:
            raise InputError(f"stall_count must be a nonnegative integer, got {self.stall_count!r}")
        _nonneg("avg_stall_ms", self.avg_stall_ms)
        if not (_finite(self.interaction_ms) and self.interaction_ms > 0):
            raise InputError(f"interaction_ms must be > 0, got {self.interaction_ms!r}")


def clamp_mos(q: float) -> float:
    return min(max(q, MOS_MIN), MOS_MAX)


def _finite(x) -> bool:
    try:
        return math.isfinite(x)
    except TypeError:
        return False


def _nonneg(name: str, x) -> None:
    if not (_finite(x) and x >= 0):
        raise InputError(f"{name} must be finite and >= 0, got {x!r}")


def _ratio(name: str, rs) -> None:
    if not (_finite(rs) and 0 <= rs < 1):
        raise InputError(f"{name} must lie in [0, 1), got {rs!r}")


def _mos(name: str, q) -> None:
    if not (_finite(q) and MOS_MIN <= q <= MOS_MAX):
        raise InputError(f"{name} must lie in [1, 5], got {q!r}")


# -- sub-models ---------------------------------------------------------------

def q_delay(delay_ms: float, params: DelayModelParams) -> float:
    """Score under end-to-end delay: ``clamp(v1 * exp(-v2 * delay_ms))``."""
    _nonneg("delay_ms", delay_ms)
    return clamp_mos(params.v1 * math.exp(-params.v2_per_ms * delay_ms))


def v2_from_jnd(jnd_s: float, gen: GeneralizedParams = GENERALIZED) -> float:
    """Delay decay rate (per ms) predicted from a task's JND in seconds."""
    _nonneg("jnd_s", jnd_s)
    return gen.alpha * math.exp(-gen.beta * jnd_s)


def stall_ratio(condition: ImpairmentCondition) -> float:
    """Fraction of session time spent frozen: ``n*Ta / (n*Ta + Tm)``."""
    if condition.stall_count == 0:
        return 0.0
    ts = condition.stall_count * condition.avg_stall_ms
    return ts / (ts + condition.interaction_ms)


def q_stall(rs: float, params: StallModelParams) -> float:
    """Score under stalling: ``clamp(v3 * exp(-v4 * rs))``."""
    _ratio("rs", rs)
    return clamp_mos(params.v3 * math.exp(-params.v4 * rs))


def v4_from_jnd(jnd_s: float, gen: GeneralizedParams = GENERALIZED) -> float:
    if not (_finite(jnd_s) and jnd_s > 0):
        raise InputError(f"jnd_s must be > 0 for the power law, got {jnd_s!r}")
    return gen.rho * jnd_s ** (-gen.sigma)


def q_combined(qd: float, qs: float, weights: CombinedWeights = GENERALIZED.weights) -> float:
    """Fuse the two sub-scores; ``(5, 5)`` maps to exactly 5."""
    _mos("qd", qd)
    _mos("qs", qs)
    return clamp_mos(4.0 * (1.0 - weights.v5 * (5.0 - qd) - weights.v6 * (5.0 - qs)) + 1.0)


# -- full models --------------------------------------------------------------

def resolve_params(task: TaskProfile, mode: Mode | str = Mode.PER_TASK,
                   gen: GeneralizedParams = GENERALIZED
                   ) -> tuple[DelayModelParams, StallModelParams]:
    mode = Mode(mode)
    if mode is Mode.PER_TASK:
        return per_task_params(task.name)
    return (DelayModelParams(gen.v1_bar, v2_from_jnd(task.jnd_s, gen)),
            StallModelParams(gen.v3_bar, v4_from_jnd(task.jnd_s, gen)))


def tpifm_predict(task: TaskProfile, condition: ImpairmentCondition,
                  mode: Mode | str = Mode.PER_TASK,
                  gen: GeneralizedParams = GENERALIZED) -> float:
    dp, sp = resolve_params(task, mode, gen)
    return q_combined(q_delay(condition.delay_ms, dp), q_stall(stall_ratio(condition), sp),
                      gen.weights)


def tpifm_components(task: TaskProfile, condition: ImpairmentCondition,
                     mode: Mode | str = Mode.PER_TASK,
                     gen: GeneralizedParams = GENERALIZED) -> dict:
    dp, sp = resolve_params(task, mode, gen)
    rs = stall_ratio(condition)
    qd = q_delay(condition.delay_ms, dp)
    qs = q_stall(rs, sp)
    return {"qd": qd, "qs": qs, "rs": rs, "score": q_combined(qd, qs, gen.weights)}


def baseline1_components(condition: ImpairmentCondition) -> dict:
    rs = stall_ratio(condition)
    qd = q_delay(condition.delay_ms, BASELINES.baseline1_delay)
    qs = q_stall(rs, BASELINES.baseline1_stall)
    return {"qd": qd, "qs": qs, "rs": rs, "score": q_combined(qd, qs, GENERALIZED.weights)}


def baseline1_predict(condition: ImpairmentCondition) -> float:
    """Same structure as the task-aware model, one parameter set for all tasks."""
    return baseline1_components(condition)["score"]


def baseline2_predict(delay_s: float, sr: float,
                      params: Baseline2Params = BASELINES.baseline2) -> float:
    """Dual-exponential baseline; note the delay here is in **seconds**."""
    _nonneg("delay_s", delay_s)
    _ratio("sr", sr)
    raw = 4.0 * params.a * math.exp(params.b_per_s * delay_s) * math.exp(-sr / params.s) + 1.0
    return clamp_mos(raw)


def baseline3_predict(delay_ms: float, sr: float,
                      params: Baseline3Params = BASELINES.baseline3) -> float:
    _nonneg("delay_ms", delay_ms)
    _ratio("sr", sr)
    return clamp_mos(params.l0 + params.l1_per_ms * delay_ms + params.l2 * sr)


def predict(model: str, condition: ImpairmentCondition, task: TaskProfile | None = None,
            mode: Mode | str = Mode.GENERALIZED) -> dict:
    """Evaluate any of :data:`MODELS` and return ``qd``/``qs``/``rs``/``score``.

    ``qd`` and ``qs`` are ``None`` for the baselines that have no sub-scores.
    """
    if model == "tpifm":
        if task is None:
            raise InputError("tpifm needs a task profile")
        return tpifm_components(task, condition, mode)
    if model == "baseline1":
        return baseline1_components(condition)
    rs = stall_ratio(condition)
    if model == "baseline2":
        score = baseline2_predict(condition.delay_ms / 1000.0, rs)
    elif model == "baseline3":
        score = baseline3_predict(condition.delay_ms, rs)
    else:
        raise InputError(f"unknown model {model!r}; expected one of {MODELS}")
    return {"qd": None, "qs": None, "rs": rs, "score": score}


# -- batch evaluation ---------------------------------------------------------

def q_delay_batch(delay_ms, params: DelayModelParams) -> np.ndarray:
    d = np.asarray(delay_ms, dtype=np.float64)
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise InputError("delays must be finite and >= 0")
    return kernels.exp_decay_clamped(d, params.v1, params.v2_per_ms)


def q_stall_batch(rs, params: StallModelParams) -> np.ndarray:
    r = np.asarray(rs, dtype=np.float64)
    if not np.all(np.isfinite(r)) or np.any(r < 0) or np.any(r >= 1):
        raise InputError("stall ratios must lie in [0, 1)")
    return kernels.exp_decay_clamped(r, params.v3, params.v4)


def stall_ratio_batch(stall_count, avg_stall_ms, interaction_ms) -> np.ndarray:
    ts = np.asarray(stall_count, dtype=np.float64) * np.asarray(avg_stall_ms, dtype=np.float64)
    tm = np.asarray(interaction_ms, dtype=np.float64)
    if np.any(tm <= 0):
        raise InputError("interaction_ms must be > 0")
    return ts / (ts + tm)


def tpifm_batch(delay_ms, rs, jnd_s=None, task: TaskProfile | str | None = None,
                mode: Mode | str = Mode.GENERALIZED,
                gen: GeneralizedParams = GENERALIZED) -> np.ndarray:
    """Vectorised :func:`tpifm_predict` over delays and stall ratios.

    In generalized mode ``jnd_s`` may be an array broadcast against the inputs;
    in per-task mode pass ``task`` instead.
    """
    d = np.asarray(delay_ms, dtype=np.float64)
    r = np.asarray(rs, dtype=np.float64)
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise InputError("delays must be finite and >= 0")
    if not np.all(np.isfinite(r)) or np.any(r < 0) or np.any(r >= 1):
        raise InputError("stall ratios must lie in [0, 1)")
    if isinstance(task, str):
        task = task_profile(task)
    if Mode(mode) is Mode.PER_TASK:
        if task is None:
            raise UnsupportedTaskError("per-task batch evaluation needs a task")
        dp, sp = per_task_params(task.name)
        v1, v2, v3, v4 = dp.v1, dp.v2_per_ms, sp.v3, sp.v4
    else:
        if jnd_s is None:
            if task is None:
                raise InputError("generalized batch evaluation needs jnd_s or a task")
            jnd_s = task.jnd_s
        j = np.asarray(jnd_s, dtype=np.float64)
        if np.any(~np.isfinite(j)) or np.any(j <= 0):
            raise InputError("jnd_s must be > 0")
        v1, v3 = gen.v1_bar, gen.v3_bar
        v2 = gen.alpha * np.exp(-gen.beta * j)
        v4 = gen.rho * j ** (-gen.sigma)
    return kernels.tpifm_batch(d, r, v1, v2, v3, v4, gen.v5, gen.v6)
