"""Session event traces: JSON-lines I/O, validation and analysis.

File layout: the first line is a metadata object (task, scenario, seed,
delay_ms, stall_count, avg_stall_ms); every following line is one event with
keys ``t_ms``, ``actor``, ``kind`` and optionally ``op_index``. UTF-8, LF line
endings, keys in that fixed order so serialisation is byte-stable.
"""
from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (
    InsufficientDataError,
    PreconditionError,
    TraceParseError,
    TraceValidationError,
)

ACTORS = ("A", "B", "system")
KINDS = ("session_start", "session_end", "input", "feedback",
         "action_start", "action_end", "stall_start", "stall_end")
META_KEYS = ("task", "scenario", "seed", "delay_ms", "stall_count", "avg_stall_ms")
EVENT_KEYS = ("t_ms", "actor", "kind", "op_index")

# Configured E2E delay at or below this counts as an ideal network.
INHERENT_LATENCY_MS = 15


@dataclass(frozen=True)
class TraceEvent:
    t_ms: int
    actor: str
    kind: str
    op_index: int | None = None


@dataclass(frozen=True)
class TraceMetadata:
    task: str
    scenario: str
    seed: int
    delay_ms: int
    stall_count: int
    avg_stall_ms: int


@dataclass(frozen=True)
class SessionTrace:
    metadata: TraceMetadata
    events: tuple[TraceEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))


@dataclass(frozen=True)
class InteractionCycle:
    actor: str
    feedback_t_ms: int
    action_start_t_ms: int
    action_end_t_ms: int

    @property
    def response_ms(self) -> int:
        return self.action_start_t_ms - self.feedback_t_ms


@dataclass(frozen=True)
class ArtEstimate:
    mean_s: float
    sd_s: float
    n_cycles: int


@dataclass(frozen=True)
class StallMeasurement:
    t_s_ms: int
    t_m_ms: int
    rs: float
    n_stalls: int = 0
    durations_ms: tuple[int, ...] = field(default_factory=tuple)


# -- serialisation ------------------------------------------------------------

def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def serialize_trace(trace: SessionTrace) -> str:
    m = trace.metadata
    lines = [json.dumps({k: getattr(m, k) for k in META_KEYS}, separators=(",", ":"))]
    for ev in trace.events:
        rec = {"t_ms": ev.t_ms, "actor": ev.actor, "kind": ev.kind}
        if ev.op_index is not None:
            rec["op_index"] = ev.op_index
        lines.append(json.dumps(rec, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def write_trace(trace: SessionTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_trace(trace))


def read_trace(path) -> SessionTrace:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_trace(fh.read())


def _parse_meta(obj, lineno: int) -> TraceMetadata:
    if not isinstance(obj, dict):
        raise TraceParseError(lineno, "metadata must be an object")
    missing = [k for k in META_KEYS if k not in obj]
    extra = sorted(set(obj) - set(META_KEYS))
    if missing or extra:
        raise TraceParseError(lineno, f"metadata keys: missing {missing}, unexpected {extra}")
    if not isinstance(obj["task"], str) or not isinstance(obj["scenario"], str):
        raise TraceParseError(lineno, "metadata task/scenario must be strings")
    for k in ("seed", "delay_ms", "stall_count", "avg_stall_ms"):
        if not _is_int(obj[k]) or obj[k] < 0:
            raise TraceParseError(lineno, f"metadata {k} must be a nonnegative integer")
    return TraceMetadata(**{k: obj[k] for k in META_KEYS})


def _parse_event(obj, lineno: int) -> TraceEvent:
    if not isinstance(obj, dict):
        raise TraceParseError(lineno, "event must be an object")
    for k in ("t_ms", "actor", "kind"):
        if k not in obj:
            raise TraceParseError(lineno, f"missing key {k!r}")
    extra = sorted(set(obj) - set(EVENT_KEYS))
    if extra:
        raise TraceParseError(lineno, f"unexpected keys {extra}")
    t, actor, kind = obj["t_ms"], obj["actor"], obj["kind"]
    if not _is_int(t) or t < 0:
        raise TraceParseError(lineno, f"t_ms must be a nonnegative integer, got {t!r}")
    if actor not in ACTORS:
        raise TraceParseError(lineno, f"unknown actor {actor!r}")
    if kind not in KINDS:
        raise TraceParseError(lineno, f"unknown kind {kind!r}")
    op = obj.get("op_index")
    if op is not None and (not _is_int(op) or op < 0):
        raise TraceParseError(lineno, f"op_index must be a nonnegative integer, got {op!r}")
    return TraceEvent(t, actor, kind, op)


def parse_trace(document: str | Iterable[str]) -> SessionTrace:
    """Parse and validate a trace document.

    Raises :class:`TraceParseError` for malformed lines and
    :class:`TraceValidationError` naming the first event that breaks an
    ordering or pairing rule.
    """
    lines = document.split("\n") if isinstance(document, str) else list(document)
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise TraceParseError(1, "empty trace")
    meta = None
    events: list[TraceEvent] = []
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.rstrip("\n")
        if raw.endswith("\r"):
            raise TraceParseError(lineno, "CR line ending")
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceParseError(lineno, f"invalid JSON: {exc.msg}") from None
        if meta is None:
            meta = _parse_meta(obj, lineno)
        else:
            events.append(_parse_event(obj, lineno))
    trace = SessionTrace(meta, tuple(events))
    validate_trace(trace, first_event_line=2)
    return trace


def validate_trace(trace: SessionTrace, first_event_line: int | None = None) -> None:
    """Check ordering and pairing invariants; raise on the first violation."""
    evs = trace.events

    def fail(i: int, msg: str):
        ln = None if first_event_line is None else first_event_line + i
        raise TraceValidationError(i, msg, ln)

    if not evs:
        raise TraceValidationError(0, "trace has no events")
    if evs[0].kind != "session_start":
        fail(0, f"first event must be session_start, got {evs[0].kind}")
    in_stall = False
    open_action: dict[str, bool] = {}
    prev_t = -1
    for i, ev in enumerate(evs):
        if ev.t_ms < prev_t:
            fail(i, f"{ev.kind} at t={ev.t_ms} precedes previous event at t={prev_t}")
        prev_t = ev.t_ms
        if ev.kind == "session_start" and i != 0:
            fail(i, "session_start after the first event")
        elif ev.kind == "session_end" and i != len(evs) - 1:
            fail(i, "session_end before the last event")
        elif ev.kind == "stall_start":
            if in_stall:
                fail(i, "nested stall_start")
            in_stall = True
        elif ev.kind == "stall_end":
            if not in_stall:
                fail(i, "stall_end without a preceding stall_start")
            in_stall = False
        elif ev.kind == "action_start":
            if open_action.get(ev.actor):
                fail(i, f"action_start for {ev.actor} while a previous action is open")
            open_action[ev.actor] = True
        elif ev.kind == "action_end":
            if not open_action.get(ev.actor):
                fail(i, f"action_end for {ev.actor} without a matching action_start")
            open_action[ev.actor] = False
    last = len(evs) - 1
    if evs[last].kind != "session_end":
        fail(last, f"last event must be session_end, got {evs[last].kind}")
    if in_stall:
        fail(last, "session ends inside a stall")
    for actor, is_open in open_action.items():
        if is_open:
            fail(last, f"action of {actor} never ends")


# -- analysis -----------------------------------------------------------------

def extract_cycles(trace: SessionTrace) -> list[InteractionCycle]:
    """Pair each feedback with the same actor's next action.

    A second feedback before the actor acts replaces the first: the cycle runs
    from the most recent cue. Feedback with no later action is dropped.
    """
    pending: dict[str, int] = {}
    started: dict[str, tuple[int, int]] = {}
    cycles: list[InteractionCycle] = []
    for ev in trace.events:
        if ev.kind == "feedback":
            pending[ev.actor] = ev.t_ms
        elif ev.kind == "action_start":
            if ev.actor in pending:
                started[ev.actor] = (pending.pop(ev.actor), ev.t_ms)
        elif ev.kind == "action_end":
            if ev.actor in started:
                fb, st = started.pop(ev.actor)
                cycles.append(InteractionCycle(ev.actor, fb, st, ev.t_ms))
    return cycles


def estimate_art(cycles: list[InteractionCycle]) -> ArtEstimate:
    if not cycles:
        raise InsufficientDataError("no interaction cycles to estimate ART from")
    resp = [c.response_ms / 1000.0 for c in cycles]
    sd = statistics.stdev(resp) if len(resp) > 1 else 0.0
    return ArtEstimate(statistics.fmean(resp), sd, len(resp))


def art_by_actor(cycles: list[InteractionCycle]) -> dict[str, ArtEstimate]:
    out = {}
    for actor in sorted({c.actor for c in cycles}):
        out[actor] = estimate_art([c for c in cycles if c.actor == actor])
    return out


def measure_stall_ratio(trace: SessionTrace) -> StallMeasurement:
    """Realised stall ratio of a session.

    Interaction time is the span from the first action_start to the last
    action_end minus the stall time falling inside that span.
    """
    starts = [e.t_ms for e in trace.events if e.kind == "action_start"]
    ends = [e.t_ms for e in trace.events if e.kind == "action_end"]
    if not starts or not ends:
        raise InsufficientDataError("trace contains no actions")
    lo, hi = min(starts), max(ends)
    durations = []
    inside = 0
    onset = None
    for e in trace.events:
        if e.kind == "stall_start":
            onset = e.t_ms
        elif e.kind == "stall_end" and onset is not None:
            durations.append(e.t_ms - onset)
            inside += max(0, min(e.t_ms, hi) - max(onset, lo))
            onset = None
    t_s = sum(durations)
    t_m = (hi - lo) - inside
    rs = t_s / (t_s + t_m) if (t_s + t_m) > 0 else 0.0
    return StallMeasurement(t_s, t_m, rs, len(durations), tuple(durations))


def is_ideal(meta: TraceMetadata) -> bool:
    return meta.delay_ms <= INHERENT_LATENCY_MS and meta.stall_count == 0


def estimate_jnd(traces: list[SessionTrace]) -> float:
    """Pooled baseline ART (seconds) over ideal-network sessions of one task."""
    if not traces:
        raise InsufficientDataError("no traces")
    tasks = {t.metadata.task for t in traces}
    if len(tasks) > 1:
        raise PreconditionError(f"traces mix tasks: {sorted(tasks)}")
    for t in traces:
        if not is_ideal(t.metadata):
            m = t.metadata
            raise PreconditionError(
                f"scenario {m.scenario!r} is impaired (delay_ms={m.delay_ms}, "
                f"stall_count={m.stall_count}); JND needs ideal sessions"
            )
    cycles = [c for t in traces for c in extract_cycles(t)]
    return estimate_art(cycles).mean_s
