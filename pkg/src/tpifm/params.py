"""Task profiles and the reference model constants.

Values are stored at their stated precision. Everything here is immutable;
:class:`ModelParamSet` bundles the lot and round-trips through JSON.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from types import MappingProxyType
from typing import Mapping

from .errors import InputError, UnsupportedTaskError


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise InputError(f"{name} must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class TaskProfile:
    name: str
    jnd_s: float

    def __post_init__(self):
        _positive("jnd_s", self.jnd_s)


@dataclass(frozen=True)
class DelayModelParams:
    v1: float
    v2_per_ms: float

    def __post_init__(self):
        _positive("v1", self.v1)
        _positive("v2_per_ms", self.v2_per_ms)


@dataclass(frozen=True)
class StallModelParams:
    v3: float
    v4: float

    def __post_init__(self):
        _positive("v3", self.v3)
        _positive("v4", self.v4)


@dataclass(frozen=True)
class CombinedWeights:
    v5: float
    v6: float

    def __post_init__(self):
        _positive("v5", self.v5)
        _positive("v6", self.v6)


@dataclass(frozen=True)
class GeneralizedParams:
    """JND-driven constants: ``v2 = alpha*exp(-beta*jnd)``, ``v4 = rho*jnd**-sigma``."""

    v1_bar: float = 4.751
    alpha: float = 6.43e-4
    beta: float = 0.679
    v3_bar: float = 4.929
    rho: float = 6.608
    sigma: float = 0.361
    v5: float = 0.104
    v6: float = 0.192

    def __post_init__(self):
        for k, v in asdict(self).items():
            _positive(k, v)

    @property
    def weights(self) -> CombinedWeights:
        return CombinedWeights(self.v5, self.v6)


@dataclass(frozen=True)
class Baseline2Params:
    a: float = 1.07
    b_per_s: float = -0.24
    s: float = 0.15


@dataclass(frozen=True)
class Baseline3Params:
    l0: float = 4.208
    l1_per_ms: float = -3.0e-4
    l2: float = -12.39


@dataclass(frozen=True)
class BaselineParams:
    baseline1_delay: DelayModelParams = DelayModelParams(4.726, 2.0e-4)
    baseline1_stall: StallModelParams = StallModelParams(4.878, 6.096)
    baseline2: Baseline2Params = Baseline2Params()
    baseline3: Baseline3Params = Baseline3Params()


@dataclass(frozen=True)
class FitQuality:
    """Goodness-of-fit (R-square, RMSE) reported alongside the per-task constants."""

    r_square: float
    rmse: float


TASKS: Mapping[str, TaskProfile] = MappingProxyType({
    "SP": TaskProfile("SP", 3.34),
    "TTT": TaskProfile("TTT", 1.57),
    "MAR": TaskProfile("MAR", 1.16),
    "BR": TaskProfile("BR", 0.38),
    "LES": TaskProfile("LES", 0.71),
    "VA": TaskProfile("VA", 0.95),
})

DELAY_PARAMS: Mapping[str, DelayModelParams] = MappingProxyType({
    "SP": DelayModelParams(4.786, 7.99e-5),
    "TTT": DelayModelParams(4.678, 1.56e-4),
    "MAR": DelayModelParams(4.777, 3.57e-4),
    "BR": DelayModelParams(4.764, 4.86e-4),
})

DELAY_FIT_QUALITY: Mapping[str, FitQuality] = MappingProxyType({
    "SP": FitQuality(0.892, 0.142),
    "TTT": FitQuality(0.981, 0.089),
    "MAR": FitQuality(0.982, 0.153),
    "BR": FitQuality(0.956, 0.273),
})

STALL_PARAMS: Mapping[str, StallModelParams] = MappingProxyType({
    "SP": StallModelParams(4.905, 4.282),
    "TTT": StallModelParams(4.965, 5.301),
    "MAR": StallModelParams(4.911, 6.611),
    "BR": StallModelParams(4.937, 9.291),
})

STALL_FIT_QUALITY: Mapping[str, FitQuality] = MappingProxyType({
    "SP": FitQuality(0.976, 0.110),
    "TTT": FitQuality(0.976, 0.145),
    "MAR": FitQuality(0.978, 0.147),
    "BR": FitQuality(0.956, 0.230),
})

GENERALIZED = GeneralizedParams()
BASELINES = BaselineParams()

# Tasks used to fit the per-task constants; the other presets are validation-only.
FITTED_TASKS = ("SP", "TTT", "MAR", "BR")


def task(name: str) -> TaskProfile:
    try:
        return TASKS[name.upper()]
    except KeyError:
        raise UnsupportedTaskError(f"unknown task {name!r}; known: {', '.join(TASKS)}") from None


def per_task_params(name: str) -> tuple[DelayModelParams, StallModelParams]:
    key = name.upper()
    if key not in DELAY_PARAMS:
        raise UnsupportedTaskError(
            f"task {name!r} has no per-task constants (available: {', '.join(DELAY_PARAMS)})"
        )
    return DELAY_PARAMS[key], STALL_PARAMS[key]


@dataclass(frozen=True)
class ModelParamSet:
    """Every constant of the model and its baselines in one serialisable record."""

    tasks: dict = field(default_factory=lambda: dict(TASKS))
    delay: dict = field(default_factory=lambda: dict(DELAY_PARAMS))
    stall: dict = field(default_factory=lambda: dict(STALL_PARAMS))
    delay_quality: dict = field(default_factory=lambda: dict(DELAY_FIT_QUALITY))
    stall_quality: dict = field(default_factory=lambda: dict(STALL_FIT_QUALITY))
    generalized: GeneralizedParams = GENERALIZED
    baselines: BaselineParams = BASELINES

    def to_dict(self) -> dict:
        return {
            "tasks": {k: t.jnd_s for k, t in self.tasks.items()},
            "delay": {k: asdict(v) for k, v in self.delay.items()},
            "stall": {k: asdict(v) for k, v in self.stall.items()},
            "delay_quality": {k: asdict(v) for k, v in self.delay_quality.items()},
            "stall_quality": {k: asdict(v) for k, v in self.stall_quality.items()},
            "generalized": asdict(self.generalized),
            "baselines": asdict(self.baselines),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParamSet":
        b = d["baselines"]
        return cls(
            tasks={k: TaskProfile(k, v) for k, v in d["tasks"].items()},
            delay={k: DelayModelParams(**v) for k, v in d["delay"].items()},
            stall={k: StallModelParams(**v) for k, v in d["stall"].items()},
            delay_quality={k: FitQuality(**v) for k, v in d["delay_quality"].items()},
            stall_quality={k: FitQuality(**v) for k, v in d["stall_quality"].items()},
            generalized=GeneralizedParams(**d["generalized"]),
            baselines=BaselineParams(
                baseline1_delay=DelayModelParams(**b["baseline1_delay"]),
                baseline1_stall=StallModelParams(**b["baseline1_stall"]),
                baseline2=Baseline2Params(**b["baseline2"]),
                baseline3=Baseline3Params(**b["baseline3"]),
            ),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelParamSet":
        return cls.from_dict(json.loads(text))
