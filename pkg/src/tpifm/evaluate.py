"""Model-vs-MOS evaluation report (per-task and pooled metrics, F-tests)."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from . import stats
from .errors import InputError, UndefinedCorrelationError
from .model import MODELS, Mode, predict
from .params import TASKS
from .sim import ConditionRow

CONDITIONS_HEADER = ("task", "scenario_id", "delay_ms", "stall_count", "avg_stall_ms",
                     "interaction_ms")
ALL = "All"


@dataclass(frozen=True)
class ReportRow:
    model: str
    task: str
    scenario_id: str
    predicted: float
    mos: float


@dataclass(frozen=True)
class SummaryRow:
    model: str
    task: str
    metrics: stats.MetricReport


@dataclass(frozen=True)
class FTestRow:
    model: str
    task: str
    result: stats.FTestResult


@dataclass(frozen=True)
class EvaluationReport:
    rows: list[ReportRow]
    summary: list[SummaryRow]
    ftests: list[FTestRow]
    screening: list[stats.ParticipantScreen]

    def metrics(self, model: str, task: str = ALL) -> stats.MetricReport:
        for s in self.summary:
            if s.model == model and s.task == task:
                return s.metrics
        raise KeyError((model, task))


def read_conditions_csv(text: str) -> list[ConditionRow]:
    rd = csv.DictReader(io.StringIO(text))
    if tuple(rd.fieldnames or ()) != CONDITIONS_HEADER:
        raise InputError(f"conditions CSV header must be {','.join(CONDITIONS_HEADER)}")
    out = []
    for lineno, r in enumerate(rd, start=2):
        try:
            out.append(ConditionRow(r["task"], r["scenario_id"], int(r["delay_ms"]),
                                    int(r["stall_count"]), int(r["avg_stall_ms"]),
                                    int(r["interaction_ms"])))
        except ValueError as exc:
            raise InputError(f"conditions line {lineno}: {exc}") from None
    return out


def write_conditions_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CONDITIONS_HEADER)
    for r in rows:
        w.writerow((r.task, r.scenario_id, r.delay_ms, r.stall_count, r.avg_stall_ms,
                    r.interaction_ms))
    return buf.getvalue()


def _safe(fn, a, b) -> float:
    try:
        return fn(a, b)
    except UndefinedCorrelationError:
        return math.nan


def summarize(pred, obs) -> stats.MetricReport:
    return stats.MetricReport(_safe(stats.pcc, pred, obs), _safe(stats.srocc, pred, obs),
                              stats.rmse(pred, obs), len(pred))


def evaluate(ratings, conditions, models=MODELS, mode: Mode | str = Mode.GENERALIZED
             ) -> EvaluationReport:
    """Score every model against the cell MOS of ``ratings``.

    The task-aware model runs in ``mode`` (generalized by default, which covers
    tasks without per-task constants). F-tests compare each other model's
    residuals with the task-aware model's, per task and pooled.
    """
    unknown = [m for m in models if m not in MODELS]
    if unknown:
        raise InputError(f"unknown models {unknown}; expected a subset of {MODELS}")
    mos_table = stats.mos(ratings)
    cond = {(c.task, c.scenario_id): c for c in conditions}
    missing = sorted(k for k in mos_table if k not in cond)
    if missing:
        listed = ", ".join(f"{t}/{s}" for t, s in missing)
        raise InputError(f"no condition row for rated cells: {listed}")
    cells = [k for k in cond if k in mos_table]
    tasks = list(dict.fromkeys(t for t, _ in cells))

    rows = []
    for m in models:
        for t, s in cells:
            prof = TASKS.get(t.upper())
            if m == "tpifm" and prof is None:
                raise InputError(f"task {t!r} has no JND preset")
            score = predict(m, cond[(t, s)].condition, prof, mode)["score"]
            rows.append(ReportRow(m, t, s, score, mos_table[(t, s)]))

    summary = []
    resid: dict[tuple[str, str], list[float]] = {}
    for m in models:
        mine = [r for r in rows if r.model == m]
        for t in tasks + [ALL]:
            sel = mine if t == ALL else [r for r in mine if r.task == t]
            pred = [r.predicted for r in sel]
            obs = [r.mos for r in sel]
            summary.append(SummaryRow(m, t, summarize(pred, obs)))
            resid[(m, t)] = [o - p for p, o in zip(pred, obs)]

    ftests = []
    if "tpifm" in models:
        for m in models:
            if m == "tpifm":
                continue
            for t in tasks + [ALL]:
                try:
                    res = stats.f_test_residuals(resid[(m, t)], resid[("tpifm", t)])
                except (stats.DegenerateError, InputError):
                    continue
                ftests.append(FTestRow(m, t, res))

    screening = stats.screen_participants(ratings, mos_table)
    return EvaluationReport(rows, summary, ftests, screening)


def _f4(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.4f}"


def format_report(rep: EvaluationReport) -> str:
    """Render the report as CSV sections introduced by ``# <name>`` lines."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write("# rows\n")
    w.writerow(("model", "task", "scenario_id", "predicted", "mos"))
    for r in rep.rows:
        w.writerow((r.model, r.task, r.scenario_id, _f4(r.predicted), _f4(r.mos)))
    buf.write("\n# summary\n")
    w.writerow(("model", "task", "n", "pcc", "srocc", "rmse"))
    for s in rep.summary:
        mt = s.metrics
        w.writerow((s.model, s.task, mt.n, _f4(mt.pcc), _f4(mt.srocc), _f4(mt.rmse)))
    buf.write("\n# ftest\n")
    w.writerow(("model", "vs", "task", "f_statistic", "p_value", "df_num", "df_den"))
    for f in rep.ftests:
        w.writerow((f.model, "tpifm", f.task, _f4(f.result.f_statistic),
                    _f4(f.result.p_value), f.result.df_num, f.result.df_den))
    buf.write("\n# screening\n")
    w.writerow(("participant_id", "n_cells", "pcc", "keep", "insufficient"))
    for p in rep.screening:
        w.writerow((p.participant_id, p.n_cells, _f4(p.pcc), int(p.keep), int(p.insufficient)))
    return buf.getvalue()


def parse_sections(text: str) -> dict[str, list[dict]]:
    """Inverse of :func:`format_report` at the CSV level."""
    out: dict[str, list[dict]] = {}
    for block in text.strip().split("\n\n"):
        head, _, body = block.partition("\n")
        if not head.startswith("# "):
            raise InputError(f"malformed report section: {head!r}")
        out[head[2:].strip()] = list(csv.DictReader(io.StringIO(body)))
    return out
