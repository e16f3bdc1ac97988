"""Deterministic two-agent turn-taking session simulator.

Agents A and B alternate operations. Each cycle: the acting agent receives
feedback, thinks, issues its input (which starts the action), the action runs
for a fixed duration, and the partner sees the result one end-to-end delay
later. A scheduled stall starts ``trigger_offset_ms`` after the input and
freezes everything for its duration. All times are integer milliseconds.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``; stall placement
is drawn first, then think times, so neither depends on the delay setting.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError, InputError
from .model import ImpairmentCondition, tpifm_predict
from .params import TASKS, TaskProfile
from .stats import RatingRecord
from .trace import (
    INHERENT_LATENCY_MS,
    SessionTrace,
    TraceEvent,
    TraceMetadata,
    measure_stall_ratio,
)

DEFAULT_ACTION_MS = 600
DEFAULT_OPERATIONS = 9
SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class TaskSpec:
    name: str
    think_mean_ms: int
    think_jitter_ms: int = 0
    n_operations: int = DEFAULT_OPERATIONS
    action_ms: int = DEFAULT_ACTION_MS


@dataclass(frozen=True)
class NetworkSpec:
    inherent_latency_ms: int = INHERENT_LATENCY_MS
    added_delay_ms: int = 0

    @property
    def e2e_delay_ms(self) -> int:
        return self.inherent_latency_ms + self.added_delay_ms


@dataclass(frozen=True)
class StallSpec:
    count: int = 0
    avg_duration_ms: int = 0
    duration_jitter_ms: int = 0
    trigger_offset_ms: int = 500


@dataclass(frozen=True)
class ScenarioConfig:
    task: TaskSpec
    network: NetworkSpec = field(default_factory=NetworkSpec)
    stalls: StallSpec = field(default_factory=StallSpec)
    seed: int = 0
    scenario: str = "custom"

    def validate(self) -> "ScenarioConfig":
        t, n, s = self.task, self.network, self.stalls
        _int_fields(t, n, s)
        if t.think_mean_ms <= 0:
            raise ConfigError("task.think_mean_ms must be > 0")
        if t.think_jitter_ms < 0:
            raise ConfigError("task.think_jitter_ms must be >= 0")
        if t.n_operations < 1:
            raise ConfigError("task.n_operations must be >= 1")
        if t.action_ms <= 0:
            raise ConfigError("task.action_ms must be > 0")
        if n.inherent_latency_ms < 0 or n.added_delay_ms < 0:
            raise ConfigError("network latencies must be >= 0")
        if s.count < 0 or s.avg_duration_ms < 0 or s.duration_jitter_ms < 0:
            raise ConfigError("stall settings must be >= 0")
        if s.count > t.n_operations:
            raise ConfigError(
                f"stalls.count={s.count} exceeds the {t.n_operations} interaction cycles "
                "(at most one stall per cycle)"
            )
        if s.count and s.avg_duration_ms <= 0:
            raise ConfigError("stalls.avg_duration_ms must be > 0 when stalls are scheduled")
        if s.count and s.duration_jitter_ms >= s.avg_duration_ms:
            raise ConfigError("stalls.duration_jitter_ms must be below avg_duration_ms")
        if not 0 <= s.trigger_offset_ms < t.action_ms:
            raise ConfigError("stalls.trigger_offset_ms must fall inside the action "
                              f"(0 <= offset < {t.action_ms})")
        if not (isinstance(self.seed, int) and 0 <= self.seed <= SEED_MAX):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return self


def _int_fields(*specs) -> None:
    for spec in specs:
        for f in fields(spec):
            v = getattr(spec, f.name)
            if f.type in ("int", int) and (not isinstance(v, int) or isinstance(v, bool)):
                raise ConfigError(f"{type(spec).__name__}.{f.name} must be an integer, got {v!r}")


@dataclass(frozen=True)
class StallEntry:
    cycle_index: int
    onset_offset_ms: int
    duration_ms: int


StallPlan = tuple[StallEntry, ...]


# -- config documents -----------------------------------------------------------

_SECTIONS = {"task": TaskSpec, "network": NetworkSpec, "stalls": StallSpec}


def config_from_dict(d: dict) -> ScenarioConfig:
    """Strict constructor: unknown or misspelled keys are rejected."""
    if not isinstance(d, dict):
        raise ConfigError("config must be an object")
    allowed = {"task", "network", "stalls", "seed", "scenario"}
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown config fields: {unknown}")
    if "task" not in d:
        raise ConfigError("config needs a task section")
    parts = {}
    for key, cls in _SECTIONS.items():
        if key not in d:
            continue
        sub = d[key]
        if not isinstance(sub, dict):
            raise ConfigError(f"{key} must be an object")
        names = {f.name for f in fields(cls)}
        bad = sorted(set(sub) - names)
        if bad:
            raise ConfigError(f"unknown fields in {key}: {bad}")
        try:
            parts[key] = cls(**sub)
        except TypeError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    cfg = ScenarioConfig(**parts, seed=d.get("seed", 0), scenario=d.get("scenario", "custom"))
    if not isinstance(cfg.scenario, str):
        raise ConfigError("scenario must be a string")
    return cfg.validate()


def load_config(text: str) -> ScenarioConfig:
    try:
        return config_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None


def dump_config(cfg: ScenarioConfig) -> str:
    return json.dumps(asdict(cfg), indent=2)


# -- simulation -----------------------------------------------------------------

def schedule_stalls(n_cycles: int, stalls: StallSpec, rng: np.random.Generator) -> StallPlan:
    """Pick ``stalls.count`` distinct cycles uniformly and size each stall."""
    if stalls.count > n_cycles:
        raise ConfigError(f"{stalls.count} stalls cannot fit in {n_cycles} cycles")
    if stalls.count == 0:
        return ()
    chosen = np.sort(rng.choice(n_cycles, size=stalls.count, replace=False))
    j = stalls.duration_jitter_ms
    if j:
        durs = stalls.avg_duration_ms + rng.integers(-j, j + 1, size=stalls.count)
    else:
        durs = np.full(stalls.count, stalls.avg_duration_ms)
    return tuple(StallEntry(int(c), stalls.trigger_offset_ms, int(d))
                 for c, d in zip(chosen, durs))


def _think_times(task: TaskSpec, rng: np.random.Generator) -> list[int]:
    if task.think_jitter_ms == 0:
        return [task.think_mean_ms] * task.n_operations
    out = []
    for _ in range(task.n_operations):
        v = rng.normal(task.think_mean_ms, task.think_jitter_ms)
        while v < 0:
            v = rng.normal(task.think_mean_ms, task.think_jitter_ms)
        out.append(int(round(v)))
    return out


def simulate_session(config: ScenarioConfig) -> SessionTrace:
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    task, stalls = config.task, config.stalls
    plan = {e.cycle_index: e for e in schedule_stalls(task.n_operations, stalls, rng)}
    thinks = _think_times(task, rng)
    delay = config.network.e2e_delay_ms

    ev = [TraceEvent(0, "system", "session_start"), TraceEvent(0, "A", "feedback", 0)]
    fb = 0
    for i in range(task.n_operations):
        actor, partner = ("A", "B") if i % 2 == 0 else ("B", "A")
        start = fb + thinks[i]
        ev.append(TraceEvent(start, actor, "input", i))
        ev.append(TraceEvent(start, actor, "action_start", i))
        frozen = 0
        if i in plan:
            s = plan[i]
            onset = start + s.onset_offset_ms
            ev.append(TraceEvent(onset, "system", "stall_start", i))
            ev.append(TraceEvent(onset + s.duration_ms, "system", "stall_end", i))
            frozen = s.duration_ms
        end = start + task.action_ms + frozen
        ev.append(TraceEvent(end, actor, "action_end", i))
        fb = end + delay
        ev.append(TraceEvent(fb, partner, "feedback", i + 1))
    ev.append(TraceEvent(fb, "system", "session_end"))

    meta = TraceMetadata(task.name, config.scenario, config.seed, delay,
                         stalls.count, stalls.avg_duration_ms)
    return SessionTrace(meta, tuple(ev))


# -- experiment design ----------------------------------------------------------

def latin_square(n: int) -> list[list[int]]:
    """Williams-style square: row ``r`` is ``(first_row + r) mod n``.

    The first row interleaves low and high indices (0, 1, n-1, 2, n-2, ...),
    which makes the square carry-over balanced for even ``n``.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputError(f"latin square size must be a positive integer, got {n!r}")
    first = [0]
    lo, hi = 1, n - 1
    take_lo = True
    while len(first) < n:
        if take_lo:
            first.append(lo)
            lo += 1
        else:
            first.append(hi)
            hi -= 1
        take_lo = not take_lo
    return [[(c + r) % n for c in first] for r in range(n)]


DELAY_LEVELS_MS = (100, 200, 300, 500, 800, 1000, 2000, 3000)
TABLE_II = ((1, 100), (1, 200), (1, 300), (1, 500), (1, 1000), (1, 2000), (2, 100),
            (2, 200), (2, 500), (2, 1000), (3, 100), (3, 200), (3, 500), (3, 1000))
TABLE_III = ((1000, 1, 300), (500, 1, 1000), (2000, 1, 2000), (800, 2, 500),
             (1000, 2, 1000), (2000, 2, 1000), (300, 3, 500), (2000, 3, 1000))
TABLE_IV = ((200, 1, 200), (2000, 1, 500), (800, 1, 1000), (500, 1, 2000), (800, 2, 300),
            (1000, 2, 400), (400, 2, 800), (200, 3, 200), (600, 3, 400), (1000, 3, 1000))
TABLES = ("II", "III", "IV", "delay_levels")
# Tasks each table was run with.
TABLE_TASKS = {"delay_levels": ("SP", "TTT", "MAR", "BR"), "II": ("SP", "TTT", "MAR", "BR"),
               "III": ("SP", "TTT", "MAR", "BR"), "IV": ("TTT", "BR", "LES", "VA")}


def task_preset(name: str | TaskProfile) -> TaskSpec:
    """Simulator task whose constant think time equals the task's JND."""
    prof = name if isinstance(name, TaskProfile) else TASKS.get(str(name).upper())
    if prof is None:
        raise ConfigError(f"no preset for task {name!r}; known: {', '.join(TASKS)}")
    return TaskSpec(prof.name, int(round(prof.jnd_s * 1000)))


def _added(e2e_ms: int, inherent: int = INHERENT_LATENCY_MS) -> int:
    # listed delays are total E2E targets on top of which nothing else is added
    return max(0, e2e_ms - inherent)


def _table_rows(table: str) -> list[tuple[int, int, int]]:
    if table in ("delay", "delay_levels"):
        return [(d, 0, 0) for d in DELAY_LEVELS_MS]
    if table == "II":
        return [(INHERENT_LATENCY_MS, n, d) for n, d in TABLE_II]
    if table == "III":
        return list(TABLE_III)
    if table == "IV":
        return list(TABLE_IV)
    raise InputError(f"unknown table {table!r}; expected one of {TABLES}")


def builtin_scenarios(table: str, task: str | TaskSpec = "BR", seed: int = 0
                      ) -> list[ScenarioConfig]:
    """Scenario configs for one built-in condition table, in table order.

    Scenario ids are ``"<table>-<k>"`` with 1-based ``k`` in table order.
    """
    spec = task if isinstance(task, TaskSpec) else task_preset(task)
    label = "delay" if table in ("delay", "delay_levels") else table
    out = []
    for k, (delay, n, dur) in enumerate(_table_rows(table), start=1):
        out.append(ScenarioConfig(
            task=spec,
            network=NetworkSpec(added_delay_ms=_added(delay)),
            stalls=StallSpec(count=n, avg_duration_ms=dur),
            seed=seed,
            scenario=f"{label}-{k}",
        ).validate())
    return out


# -- synthetic ratings ----------------------------------------------------------

def _rate(q: float, n: int, noise_sd: float, rng: np.random.Generator) -> list[int]:
    noisy = q + rng.normal(0.0, noise_sd, size=n) if noise_sd > 0 else np.full(n, q)
    # half-up rounding, then clamp onto the 5-point scale
    return [int(v) for v in np.clip(np.floor(noisy + 0.5), 1, 5)]


def synth_ratings(q: float, n_participants: int, noise_sd: float, seed: int = 0) -> list[int]:
    """Integer 1..5 ratings scattered around a model score ``q``."""
    if not (np.isfinite(q) and 1.0 <= q <= 5.0):
        raise InputError(f"score must lie in [1, 5], got {q!r}")
    if n_participants < 1:
        raise InputError("n_participants must be >= 1")
    if not noise_sd >= 0:
        raise InputError("noise_sd must be >= 0")
    return _rate(q, n_participants, noise_sd, np.random.Generator(np.random.PCG64(seed)))


@dataclass(frozen=True)
class ConditionRow:
    task: str
    scenario_id: str
    delay_ms: int
    stall_count: int
    avg_stall_ms: int
    interaction_ms: int

    @property
    def condition(self) -> ImpairmentCondition:
        return ImpairmentCondition(self.delay_ms, self.stall_count, self.avg_stall_ms,
                                   self.interaction_ms)


def study_conditions(table: str = "IV", tasks=None, seed: int = 0) -> list[ConditionRow]:
    """Condition rows for a table, with interaction time measured by simulation."""
    tasks = TABLE_TASKS[table] if tasks is None else tasks
    rows = []
    for name in tasks:
        for cfg in builtin_scenarios(table, name, seed):
            tr = simulate_session(cfg)
            m = measure_stall_ratio(tr)
            rows.append(ConditionRow(cfg.task.name, cfg.scenario, cfg.network.e2e_delay_ms,
                                     cfg.stalls.count, cfg.stalls.avg_duration_ms, m.t_m_ms))
    return rows


def synth_study(conditions: list[ConditionRow], n_participants: int = 24,
                noise_sd: float = 0.3, seed: int = 0, mode: str = "generalized"
                ) -> list[RatingRecord]:
    """Ratings of a synthetic cohort with the task-aware model as ground truth."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for row in conditions:
        q = tpifm_predict(TASKS[row.task], row.condition, mode)
        for pid, r in enumerate(_rate(q, n_participants, noise_sd, rng), start=1):
            out.append(RatingRecord(f"P{pid:02d}", row.task, row.scenario_id, r))
    return out


def with_seed(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(config, seed=seed).validate()
