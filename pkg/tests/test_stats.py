import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tpifm import sim
from tpifm import stats as S
from tpifm.errors import (
    DegenerateError,
    InputError,
    InsufficientDataError,
    UndefinedCorrelationError,
)
from tpifm.model import ImpairmentCondition, tpifm_predict
from tpifm.params import TASKS


def brute_pearson(a, b):
    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    cov = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = math.fsum((x - ma) ** 2 for x in a)
    vb = math.fsum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def brute_ranks(a):
    return [sum(1 for y in a if y < x) + (sum(1 for y in a if y == x) + 1) / 2 for x in a]


def f_pvalue_quadrature(f, d1, d2):
    """Two-sided p from direct integration of the F density (no incomplete beta)."""
    mpmath.mp.dps = 30
    d1, d2 = mpmath.mpf(d1), mpmath.mpf(d2)
    lognorm = (mpmath.loggamma((d1 + d2) / 2) - mpmath.loggamma(d1 / 2)
               - mpmath.loggamma(d2 / 2) + d1 / 2 * mpmath.log(d1 / d2))

    def pdf(x):
        return mpmath.exp(lognorm + (d1 / 2 - 1) * mpmath.log(x)
                          - (d1 + d2) / 2 * mpmath.log(1 + d1 * x / d2))

    lower = mpmath.quad(pdf, [0, 1, f])
    upper = mpmath.quad(pdf, [f, 10 * f, mpmath.inf])
    return float(min(1, 2 * min(lower, upper)))


class TestMos:
    def rec(self, r, pid="p", task="BR", sc="1"):
        return S.RatingRecord(pid, task, sc, r)

    def test_cell_mean(self):
        assert S.mos([self.rec(x) for x in (4, 4, 5, 5)]) == {("BR", "1"): 4.5}

    def test_single(self):
        assert S.mos([self.rec(3)]) == {("BR", "1"): 3.0}

    def test_empty(self):
        with pytest.raises(InsufficientDataError):
            S.mos([])

    def test_invalid_rating(self):
        with pytest.raises(InputError):
            self.rec(6)

    def test_large_sample(self):
        q = tpifm_predict(TASKS["BR"], ImpairmentCondition(2000, 0, 0, 9000), "per_task")
        recs = [self.rec(r, pid=str(i)) for i, r in
                enumerate(sim.synth_ratings(q, 10000, 0.5, seed=77))]
        assert abs(S.mos(recs)[("BR", "1")] - 3.622) <= 0.03

    def test_csv_round_trip(self):
        recs = [self.rec(3, "a"), self.rec(5, "b", "TTT", "IV-2")]
        assert S.read_ratings_csv(S.write_ratings_csv(recs)) == recs


class TestScreening:
    def cells(self, values, pid):
        return [S.RatingRecord(pid, "T", str(i), v) for i, v in enumerate(values)]

    def test_identical_and_reversed(self):
        recs = self.cells([1, 2, 3, 4, 5], "same") + self.cells([5, 4, 3, 2, 1], "rev")
        table = {("T", str(i)): float(v) for i, v in enumerate([1, 2, 3, 4, 5])}
        out = {p.participant_id: p for p in S.screen_participants(recs, table)}
        assert out["same"].pcc == pytest.approx(1.0) and out["same"].keep
        assert out["rev"].pcc == pytest.approx(-1.0) and not out["rev"].keep

    def test_insufficient_flagged(self):
        recs = self.cells([1, 2], "few") + self.cells([1, 2, 3], "ok")
        out = {p.participant_id: p for p in S.screen_participants(recs)}
        assert out["few"].insufficient and not out["few"].keep
        assert not out["ok"].insufficient

    def test_cohort(self):
        recs = sim.synth_study(sim.study_conditions("IV"), 24, 0.3, seed=5)
        res = S.screen_participants(recs)
        assert len(res) == 24
        assert sum(p.pcc is not None and p.pcc >= 0.75 for p in res) >= 20


class TestCorrelation:
    def test_pcc_examples(self):
        assert S.pcc([1, 2, 3], [1, 2, 3]) == pytest.approx(1)
        assert S.pcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1)
        assert S.pcc([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)

    def test_srocc_examples(self):
        assert S.srocc([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)
        assert S.srocc([1, 1, 2], [1, 2, 3]) == pytest.approx(0.866, abs=1e-3)
        assert S.srocc([1, 1, 2], [1, 2, 3]) == pytest.approx(
            brute_pearson([1.5, 1.5, 3], [1, 2, 3]), abs=1e-15)
        x = np.array([0.3, 2.0, -1.0, 5.0])
        assert S.srocc(x, np.exp(x) ** 3) == pytest.approx(1.0)

    def test_constant_is_error(self):
        with pytest.raises(UndefinedCorrelationError):
            S.pcc([1, 1, 1], [1, 2, 3])
        with pytest.raises(UndefinedCorrelationError):
            S.srocc([1, 2, 3], [2, 2, 2])

    def test_length(self):
        with pytest.raises(InputError):
            S.pcc([1, 2], [1, 2, 3])
        with pytest.raises(InputError):
            S.pcc([1], [1])

    vecs = st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=8)

    @given(vecs, st.floats(0.01, 100), st.floats(-50, 50))
    def test_pcc_affine(self, a, scale, shift):
        b = list(reversed(a))
        try:
            base = S.pcc(a, b)
        except UndefinedCorrelationError:
            return
        t = [scale * x + shift for x in a]
        if len(set(t)) < 2:
            return
        assert S.pcc(t, b) == pytest.approx(base, abs=1e-9)
        assert S.pcc([-x for x in a], b) == pytest.approx(-base, abs=1e-12)


class TestRmse:
    def test_examples(self):
        assert S.rmse([1, 2], [1, 2]) == 0
        assert S.rmse([0, 0], [3, 4]) == pytest.approx(3.5355, abs=1e-4)
        assert S.rmse([1.5, 2.5], [1, 2]) == pytest.approx(0.5)

    def test_mismatch(self):
        with pytest.raises(InputError):
            S.rmse([1], [1, 2])

    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10)),
                    min_size=1, max_size=8))
    def test_symmetry_and_triangle(self, triples):
        x, y, z = map(list, zip(*triples))
        assert S.rmse(x, y) == S.rmse(y, x)
        assert S.rmse(x, z) <= S.rmse(x, y) + S.rmse(y, z) + 1e-12


class TestFTest:
    def test_identical(self):
        r = S.f_test_residuals([1, -2, 3], [1, -2, 3])
        assert r.f_statistic == 1 and r.p_value == 1

    def test_ratio_four(self):
        r = S.f_test_residuals([1, -1, 1, -1], [2, -2, 2, -2])
        assert r.f_statistic == 4.0
        assert (r.df_num, r.df_den) == (3, 3)

    @pytest.mark.parametrize("f,d1,d2", [(4.0, 3, 3), (2.5, 10, 10), (1.7, 7, 31), (0.6, 7, 31)])
    def test_pvalue_vs_quadrature(self, f, d1, d2):
        p = min(1.0, 2 * min(S.f_sf(f, d1, d2), S.f_cdf(f, d1, d2)))
        assert p == pytest.approx(f_pvalue_quadrature(f, d1, d2), abs=1e-10)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(0, 1, 9), rng.normal(0, 2, 12)
        assert S.f_test_residuals(a, b) == S.f_test_residuals(b, a)

    def test_degenerate(self):
        with pytest.raises(DegenerateError):
            S.f_test_residuals([1, 1], [2, 2])
        with pytest.raises(InputError):
            S.f_test_residuals([1], [1, 2])
