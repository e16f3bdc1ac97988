"""MOS aggregation, rater screening and the model-validation metrics."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

from .errors import (
    DegenerateError,
    InputError,
    InsufficientDataError,
    UndefinedCorrelationError,
)

RATINGS_HEADER = ("participant_id", "task", "scenario_id", "rating")
SCREEN_THRESHOLD = 0.75


@dataclass(frozen=True)
class RatingRecord:
    participant_id: str
    task: str
    scenario_id: str
    rating: int

    def __post_init__(self):
        if isinstance(self.rating, bool) or self.rating not in (1, 2, 3, 4, 5):
            raise InputError(f"rating must be an integer 1..5, got {self.rating!r}")


@dataclass(frozen=True)
class MetricReport:
    pcc: float
    srocc: float
    rmse: float
    n: int
    f_statistic: float | None = None
    p_value: float | None = None


@dataclass(frozen=True)
class ParticipantScreen:
    participant_id: str
    n_cells: int
    pcc: float | None
    keep: bool
    insufficient: bool = False


@dataclass(frozen=True)
class FTestResult:
    f_statistic: float
    p_value: float
    df_num: int
    df_den: int


# -- ratings I/O ------------------------------------------------------------------

def read_ratings_csv(text: str) -> list[RatingRecord]:
    rd = csv.DictReader(io.StringIO(text))
    if tuple(rd.fieldnames or ()) != RATINGS_HEADER:
        raise InputError(f"ratings CSV header must be {','.join(RATINGS_HEADER)}")
    out = []
    for lineno, row in enumerate(rd, start=2):
        try:
            out.append(RatingRecord(row["participant_id"], row["task"], row["scenario_id"],
                                    int(row["rating"])))
        except (ValueError, InputError) as exc:
            raise InputError(f"ratings line {lineno}: {exc}") from None
    return out


def write_ratings_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATINGS_HEADER)
    for r in records:
        w.writerow((r.participant_id, r.task, r.scenario_id, r.rating))
    return buf.getvalue()


# -- aggregation ----------------------------------------------------------------

def mos(records) -> dict[tuple[str, str], float]:
    """Mean rating per (task, scenario_id) cell."""
    cells = defaultdict(list)
    for r in records:
        cells[(r.task, r.scenario_id)].append(r.rating)
    if not cells:
        raise InsufficientDataError("no ratings")
    return {k: math.fsum(v) / len(v) for k, v in cells.items()}


def screen_participants(records, mos_table=None, threshold: float = SCREEN_THRESHOLD
                        ) -> list[ParticipantScreen]:
    """Correlate each rater with the cell MOS and flag those below ``threshold``.

    Nobody is removed here; raters with fewer than three cells (or constant
    ratings) come back with ``insufficient=True`` and ``keep=False``.
    """
    mos_table = mos(records) if mos_table is None else mos_table
    per = defaultdict(lambda: defaultdict(list))
    for r in records:
        per[r.participant_id][(r.task, r.scenario_id)].append(r.rating)
    out = []
    for pid in sorted(per):
        cells = per[pid]
        keys = sorted(cells)
        if len(keys) < 3:
            out.append(ParticipantScreen(pid, len(keys), None, False, True))
            continue
        own = [math.fsum(cells[k]) / len(cells[k]) for k in keys]
        ref = [mos_table[k] for k in keys]
        try:
            r = pcc(own, ref)
        except UndefinedCorrelationError:
            out.append(ParticipantScreen(pid, len(keys), None, False, True))
            continue
        out.append(ParticipantScreen(pid, len(keys), r, r >= threshold))
    return out


# -- metrics ----------------------------------------------------------------------

def _pair(a, b, min_len: int = 2):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise InputError(f"vectors must be 1-D and equal length, got {a.shape} and {b.shape}")
    if a.size < min_len:
        raise InputError(f"need at least {min_len} values, got {a.size}")
    return a, b


def pcc(a, b) -> float:
    a, b = _pair(a, b)
    da, db = a - a.mean(), b - b.mean()
    sa, sb = math.sqrt(np.dot(da, da)), math.sqrt(np.dot(db, db))
    if sa == 0 or sb == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    return float(min(1.0, max(-1.0, np.dot(da, db) / (sa * sb))))


def srocc(a, b) -> float:
    """Spearman correlation: Pearson on average-tied ranks."""
    a, b = _pair(a, b)
    return pcc(rankdata(a, method="average"), rankdata(b, method="average"))


def rmse(pred, obs) -> float:
    p, o = _pair(pred, obs, min_len=1)
    d = p - o
    return math.sqrt(float(np.dot(d, d)) / d.size)


def metric_report(pred, obs) -> MetricReport:
    return MetricReport(pcc(pred, obs), srocc(pred, obs), rmse(pred, obs), len(pred))


def f_cdf(x: float, d1: float, d2: float) -> float:
    if x <= 0:
        return 0.0
    return float(betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2)))


def f_sf(x: float, d1: float, d2: float) -> float:
    if x <= 0:
        return 1.0
    # complementary form keeps precision in the upper tail
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x)))


def f_test_residuals(resid_a, resid_b) -> FTestResult:
    """Two-sided variance-ratio test with the larger variance on top."""
    a = np.asarray(resid_a, dtype=np.float64)
    b = np.asarray(resid_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise InputError("each residual vector needs at least 2 values")
    va, vb = float(np.var(a, ddof=1)), float(np.var(b, ddof=1))
    if va == 0 and vb == 0:
        raise DegenerateError("both residual vectors have zero variance")
    if va >= vb:
        num, den, d1, d2 = va, vb, a.size - 1, b.size - 1
    else:
        num, den, d1, d2 = vb, va, b.size - 1, a.size - 1
    if den == 0:
        return FTestResult(math.inf, 0.0, d1, d2)
    f = num / den
    p = min(1.0, 2.0 * min(f_sf(f, d1, d2), f_cdf(f, d1, d2)))
    return FTestResult(f, p, d1, d2)
