import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import betainc_series, binomial_p_exact
from vibropsi.stats import (
    RT_ANOMALY,
    SIDE_BIAS,
    DegenerateSampleError,
    betainc,
    binomial_test,
    bonferroni,
    run_bias_guard,
    t_cdf,
    t_test_one_sample,
    t_test_two_sample,
)


class TestBetainc:
    def test_endpoints(self):
        assert betainc(2.0, 3.0, 0.0) == 0.0
        assert betainc(2.0, 3.0, 1.0) == 1.0

    def test_symmetry(self):
        for a, b, x in [(2.0, 5.0, 0.3), (0.5, 0.5, 0.7), (10.0, 1.5, 0.9)]:
            assert betainc(a, b, x) + betainc(b, a, 1.0 - x) == pytest.approx(1.0, abs=1e-14)

    def test_uniform_case(self):
        # I_x(1, 1) = x
        for x in (0.1, 0.5, 0.73):
            assert betainc(1.0, 1.0, x) == pytest.approx(x, abs=1e-14)

    def test_closed_form_a2_b1(self):
        # I_x(2, 1) = x^2
        assert betainc(2.0, 1.0, 0.6) == pytest.approx(0.36, abs=1e-13)

    def test_against_series_oracle_grid(self):
        shapes = [0.25, 0.5, 1.0, 2.5, 5.0, 12.0, 30.0, 100.0]
        xs = np.linspace(0.001, 0.999, 17)
        checked = 0
        for a in shapes:
            for b in shapes:
                for x in xs:
                    got = betainc(a, b, float(x))
                    want = betainc_series(a, b, float(x))
                    assert got == pytest.approx(want, abs=1e-8), (a, b, x)
                    checked += 1
        assert checked > 1000

    @given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0.01, 0.99))
    @settings(max_examples=200, deadline=None)
    def test_hypothesis_vs_series(self, a, b, x):
        assert betainc(a, b, x) == pytest.approx(betainc_series(a, b, x), abs=1e-8)

    def test_monotone_in_x(self):
        xs = np.linspace(0, 1, 200)
        vals = [betainc(3.0, 4.0, float(x)) for x in xs]
        assert all(v2 >= v1 for v1, v2 in zip(vals, vals[1:]))

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            betainc(0.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            betainc(1.0, 1.0, 1.5)


class TestTCdf:
    def test_zero_is_half(self):
        for df in (1, 5, 30):
            assert t_cdf(0.0, df) == pytest.approx(0.5, abs=1e-12)

    def test_symmetry(self):
        for t in (0.5, 1.7, 3.2):
            assert t_cdf(t, 7) + t_cdf(-t, 7) == pytest.approx(1.0, abs=1e-12)

    def test_df1_is_cauchy(self):
        # F(t) = 1/2 + arctan(t)/pi
        for t in (-2.0, 0.3, 5.0):
            want = 0.5 + math.atan(t) / math.pi
            assert t_cdf(t, 1) == pytest.approx(want, abs=1e-12)

    def test_classic_critical_value(self):
        # two-sided alpha = 0.05 at df = 9 corresponds to t = 2.262
        p = 2 * (1 - t_cdf(2.262, 9))
        assert p == pytest.approx(0.05, abs=0.002)

    def test_large_df_approaches_normal(self):
        # standard normal CDF at 1.96 is ~0.975
        assert t_cdf(1.96, 100_000) == pytest.approx(0.975, abs=5e-4)

    def test_invalid_df(self):
        with pytest.raises(ValueError):
            t_cdf(1.0, 0)


class TestBinomialTest:
    def test_balanced_is_one(self):
        assert binomial_test(25, 50) == pytest.approx(1.0, abs=1e-12)

    def test_trivial_cases(self):
        assert binomial_test(0, 1) == 1.0
        assert binomial_test(1, 1) == 1.0
        assert binomial_test(0, 10) == pytest.approx(2 * 0.5**10, abs=1e-15)

    def test_symmetry_exact(self):
        for n in (10, 25, 50):
            for k in range(n + 1):
                assert binomial_test(k, n) == pytest.approx(
                    binomial_test(n - k, n), abs=1e-12)

    def test_against_rational_oracle(self):
        cases = [(35, 50), (10, 50), (30, 40), (3, 20), (18, 20), (26, 50)]
        for k, n in cases:
            want = binomial_p_exact(k, n, 1, 2)
            assert binomial_test(k, n) == pytest.approx(want, rel=1e-9), (k, n)

    def test_skewed_null_vs_oracle(self):
        for k, n, num, den in [(10, 50, 1, 4), (40, 50, 3, 4), (5, 30, 1, 10)]:
            want = binomial_p_exact(k, n, num, den)
            assert binomial_test(k, n, num / den) == pytest.approx(want, rel=1e-9)

    def test_35_of_50_is_significant(self):
        p = binomial_test(35, 50)
        assert p < 0.05
        assert p == pytest.approx(binomial_p_exact(35, 50, 1, 2), rel=1e-9)

    @given(st.integers(1, 80), st.data())
    @settings(max_examples=150, deadline=None)
    def test_hypothesis_vs_oracle(self, n, data):
        k = data.draw(st.integers(0, n))
        assert binomial_test(k, n) == pytest.approx(
            binomial_p_exact(k, n, 1, 2), rel=1e-9)

    def test_degenerate_nulls(self):
        assert binomial_test(0, 10, 0.0) == 1.0
        assert binomial_test(3, 10, 0.0) == 0.0
        assert binomial_test(10, 10, 1.0) == 1.0

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            binomial_test(5, 4)
        with pytest.raises(ValueError):
            binomial_test(0, 0)
        with pytest.raises(ValueError):
            binomial_test(1, 2, 1.5)


class TestOneSampleT:
    def test_textbook_example(self):
        # mean 5.2, s ~ 0.527, n = 5 against mu0 = 4.5
        xs = [4.6, 5.0, 5.2, 5.4, 5.8]
        res = t_test_one_sample(xs, 4.5)
        se = np.std(xs, ddof=1) / math.sqrt(5)
        assert res.t == pytest.approx((np.mean(xs) - 4.5) / se, abs=1e-12)
        assert res.df == 4
        assert 0 < res.p < 1

    def test_mean_equals_null_gives_t_zero(self):
        res = t_test_one_sample([1.0, 2.0, 3.0], 2.0)
        assert res.t == 0.0
        assert res.p == 1.0

    def test_zero_variance_at_null(self):
        res = t_test_one_sample([3.0, 3.0, 3.0], 3.0)
        assert res.p == 1.0
        assert res.degenerate

    def test_zero_variance_off_null(self):
        res = t_test_one_sample([3.0, 3.0, 3.0], 2.0)
        assert res.p == 0.0
        assert res.degenerate
        assert res.t == math.inf

    def test_needs_two_samples(self):
        with pytest.raises(DegenerateSampleError):
            t_test_one_sample([1.0], 0.0)

    def test_p_matches_cdf_route(self):
        xs = [1.1, 0.8, 1.4, 0.9, 1.2, 1.0]
        res = t_test_one_sample(xs, 0.7)
        want = 2 * (1 - t_cdf(abs(res.t), res.df))
        assert res.p == pytest.approx(want, abs=1e-10)


class TestTwoSampleT:
    def test_identical_groups(self):
        res = t_test_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert res.t == 0.0
        assert res.p == 1.0

    def test_welch_df_below_pooled(self):
        a = [1.0, 1.1, 0.9, 1.05]
        b = [5.0, 9.0, 2.0, 7.5, 4.0]
        res = t_test_two_sample(a, b)
        assert res.df < len(a) + len(b) - 2
        assert res.p < 0.05

    def test_welch_statistic_vs_numpy_route(self):
        a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4]
        b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 30.5, 24.3]
        res = t_test_two_sample(a, b)
        va, vb = np.var(a, ddof=1), np.var(b, ddof=1)
        na, nb = len(a), len(b)
        se2 = va / na + vb / nb
        t_want = (np.mean(a) - np.mean(b)) / math.sqrt(se2)
        df_want = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
        assert res.t == pytest.approx(t_want, abs=1e-12)
        assert res.df == pytest.approx(df_want, abs=1e-10)
        assert res.p == pytest.approx(2 * (1 - t_cdf(abs(res.t), res.df)), abs=1e-10)

    def test_degenerate_equal_constants(self):
        res = t_test_two_sample([2.0, 2.0], [2.0, 2.0])
        assert res.p == 1.0 and res.degenerate

    def test_degenerate_distinct_constants(self):
        res = t_test_two_sample([2.0, 2.0], [3.0, 3.0])
        assert res.p == 0.0 and res.degenerate

    def test_needs_two_per_group(self):
        with pytest.raises(DegenerateSampleError):
            t_test_two_sample([1.0], [1.0, 2.0])


class TestBonferroni:
    def test_scales_and_clamps(self):
        assert bonferroni([0.01, 0.4, 0.9]) == [0.03, 1.0, 1.0]

    def test_single_p_unchanged(self):
        assert bonferroni([0.2]) == [0.2]

    def test_empty(self):
        assert bonferroni([]) == []

    def test_invalid(self):
        with pytest.raises(ValueError):
            bonferroni([1.2])


@dataclass
class FakeTrial:
    separation: float
    target: str
    response: str
    correct: bool
    response_time: float


def make_trials(responses, targets=None, rts=None, separation=20.0):
    n = len(responses)
    targets = targets or ["FIRST_A" if i % 2 == 0 else "FIRST_B" for i in range(n)]
    rts = rts or [900.0 + 10 * (i % 7) for i in range(n)]
    return [
        FakeTrial(separation, t, r, r == t, rt)
        for t, r, rt in zip(targets, responses, rts)
    ]


class TestBiasGuard:
    def test_balanced_session_clean(self):
        responses = ["FIRST_A", "FIRST_B"] * 25
        report = run_bias_guard(make_trials(responses))
        assert report.flags == []
        assert not report.excluded
        assert report.binomial_p == pytest.approx(1.0, abs=1e-9)

    def test_hard_side_bias_flagged(self):
        responses = ["FIRST_A"] * 42 + ["FIRST_B"] * 8
        report = run_bias_guard(make_trials(responses))
        assert SIDE_BIAS in report.flags
        assert report.excluded

    def test_rt_anomaly_flagged(self):
        responses = ["FIRST_A", "FIRST_B"] * 25
        rts = [1400.0 + (i % 5) if r == "FIRST_A" else 900.0 + (i % 5)
               for i, r in enumerate(responses)]
        report = run_bias_guard(make_trials(responses, rts=rts))
        assert RT_ANOMALY in report.flags
        assert report.excluded

    def test_orientation_labels_supported(self):
        responses = ["HORIZONTAL"] * 40 + ["VERTICAL"] * 10
        targets = ["HORIZONTAL", "VERTICAL"] * 25
        report = run_bias_guard(make_trials(responses, targets=targets))
        assert SIDE_BIAS in report.flags
        assert set(report.side_counts) == {"HORIZONTAL", "VERTICAL"}

    def test_per_separation_table(self):
        trials = (make_trials(["FIRST_A", "FIRST_B"] * 10, separation=10.0)
                  + make_trials(["FIRST_A", "FIRST_B"] * 10, separation=30.0))
        report = run_bias_guard(trials)
        assert set(report.per_separation_table) == {"10", "30"}
        row = report.per_separation_table["10"]["FIRST_A"]
        assert row["responses"] == 10
        assert 0 <= row["accuracy"] <= 1

    def test_empty_session(self):
        report = run_bias_guard([])
        assert report.flags == []
        assert not report.excluded

    def test_alpha_controls_sensitivity(self):
        responses = ["FIRST_A"] * 32 + ["FIRST_B"] * 18
        trials = make_trials(responses)
        loose = run_bias_guard(trials, alpha=0.5)
        strict = run_bias_guard(trials, alpha=1e-6)
        assert SIDE_BIAS in loose.flags
        assert SIDE_BIAS not in strict.flags

    def test_report_to_dict_round_trips_via_json(self):
        import json
        report = run_bias_guard(make_trials(["FIRST_A", "FIRST_B"] * 25))
        doc = json.loads(json.dumps(report.to_dict()))
        assert doc["excluded"] is False
        assert doc["side_counts"]["FIRST_A"] == 25
