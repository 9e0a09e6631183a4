import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import invert_by_bisection, weibull_oracle
from vibropsi.psymodel import (
    NOT_REACHED,
    CurveSamples,
    GridConfig,
    NonMonotoneCurveError,
    WeibullParams,
    build_grid,
    eval_weibull,
    invert_curve,
)


class TestWeibullParams:
    def test_valid(self):
        p = WeibullParams(15, 3, 0.25, 0.15)
        assert p.a == 15

    @pytest.mark.parametrize("kwargs", [
        dict(a=0, b=3, gamma=0.5, delta=0.02),
        dict(a=-1, b=3, gamma=0.5, delta=0.02),
        dict(a=15, b=0, gamma=0.5, delta=0.02),
        dict(a=15, b=3, gamma=0.0, delta=0.02),
        dict(a=15, b=3, gamma=1.0, delta=0.02),
        dict(a=15, b=3, gamma=0.5, delta=-0.1),
        dict(a=15, b=3, gamma=0.5, delta=1.0),
        dict(a=15, b=3, gamma=0.6, delta=0.4),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            WeibullParams(**kwargs)


class TestEvalWeibull:
    def setup_method(self):
        self.p = WeibullParams(a=15, b=3, gamma=0.25, delta=0.15)

    def test_at_zero_is_guess_rate(self):
        assert eval_weibull(self.p, 0.0) == pytest.approx(0.25, abs=1e-15)

    def test_at_threshold_is_midpoint(self):
        # gamma + span/2 = 0.25 + 0.6/2
        assert eval_weibull(self.p, 15.0) == pytest.approx(0.55, abs=1e-12)

    def test_approaches_upper_asymptote_from_below(self):
        y = eval_weibull(self.p, 1000.0)
        assert y <= 0.85
        assert y > 0.85 - 1e-9

    def test_negative_separation_rejected(self):
        with pytest.raises(ValueError):
            eval_weibull(self.p, -1.0)

    def test_vectorized_matches_scalar(self):
        xs = np.array([0.0, 5.0, 15.0, 40.0])
        ys = eval_weibull(self.p, xs)
        assert ys.shape == xs.shape
        for x, y in zip(xs, ys):
            assert y == eval_weibull(self.p, float(x))

    @given(st.floats(0.1, 100), st.floats(0.2, 8), st.floats(0.05, 0.9),
           st.floats(0, 0.05), st.floats(0, 500))
    @settings(max_examples=200, deadline=None)
    def test_matches_plain_math_oracle(self, a, b, gamma, delta, x):
        if gamma + delta >= 1:
            return
        p = WeibullParams(a, b, gamma, delta)
        assert eval_weibull(p, x) == pytest.approx(
            weibull_oracle(a, b, gamma, delta, x), abs=1e-12)

    def test_strictly_increasing(self):
        # up to ~3 thresholds; beyond that the float value saturates at 1-delta
        xs = np.linspace(0.01, 45, 500)
        ys = eval_weibull(self.p, xs)
        assert np.all(np.diff(ys) > 0)


class TestBuildGrid:
    def test_default_cell_count(self, default_grid):
        assert default_grid.size == 90_000
        assert default_grid.shape == (18, 50, 100)

    def test_default_threshold_spacing(self, default_grid):
        # (45 - 2.5) / 17 = 2.5 exactly
        expected = [2.5 + 2.5 * i for i in range(18)]
        assert default_grid.a_values == pytest.approx(expected, abs=1e-12)

    def test_default_delta(self, default_grid):
        assert default_grid.delta == 0.02

    def test_two_point_grid_corners(self):
        g = build_grid(GridConfig(a_count=2, b_count=2, gamma_count=2))
        assert g.size == 8
        assert list(g.a_values) == [2.5, 45.0]
        assert list(g.b_values) == [0.01, 10.0]
        assert list(g.gamma_values) == [0.01, 0.99]

    def test_deterministic_bit_identical(self):
        g1, g2 = build_grid(), build_grid()
        assert np.array_equal(g1.a_values, g2.a_values)
        assert np.array_equal(g1.b_values, g2.b_values)
        assert np.array_equal(g1.gamma_values, g2.gamma_values)

    def test_log_slope_spacing(self):
        g = build_grid(GridConfig(b_spacing="log"))
        ratios = g.b_values[1:] / g.b_values[:-1]
        assert ratios == pytest.approx([ratios[0]] * 49, rel=1e-9)
        assert g.b_values[0] == pytest.approx(0.01)
        assert g.b_values[-1] == pytest.approx(10.0)

    @pytest.mark.parametrize("kwargs", [
        dict(gamma_max=1.0),
        dict(gamma_min=0.0),
        dict(a_min=-2, a_max=45),
        dict(a_count=1),
        dict(delta=1.0),
        dict(b_spacing="cubic"),
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            GridConfig(**kwargs)

    def test_psi_field_matches_cellwise_eval(self, small_grid):
        x = 17.0
        field = small_grid.psi_field(x)
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    expected = weibull_oracle(
                        small_grid.a_values[i], small_grid.b_values[j],
                        small_grid.gamma_values[k], small_grid.delta, x)
                    assert field[i, j, k] == pytest.approx(expected, abs=1e-14)


class TestInvertCurve:
    def test_weibull_against_bisection_oracle(self):
        p = WeibullParams(a=20, b=3, gamma=0.5, delta=0.02)
        x = invert_curve(p, 0.75)
        oracle = invert_by_bisection(lambda v: weibull_oracle(20, 3, 0.5, 0.02, v),
                                     0.75, 0, 100)
        assert x == pytest.approx(oracle, abs=1e-9)
        assert x == pytest.approx(20.4, abs=0.05)

    def test_not_reached_on_range(self):
        # shallow curve whose maximum on [0, 45] stays below the level
        p = WeibullParams(a=40, b=3, gamma=0.5, delta=0.02)
        assert eval_weibull(p, 45.0) < 0.96
        assert invert_curve(p, 0.96, x_range=(0.0, 45.0)) is NOT_REACHED
        # the same level is reached once the curve is steep enough
        steep = WeibullParams(a=20, b=3, gamma=0.5, delta=0.02)
        assert invert_curve(steep, 0.96, x_range=(0.0, 45.0)) is not NOT_REACHED

    def test_level_above_upper_asymptote_never_reached(self):
        p = WeibullParams(a=20, b=3, gamma=0.5, delta=0.02)
        assert invert_curve(p, 0.99, x_range=(0.0, 1e9)) is NOT_REACHED

    def test_midpoint_returns_threshold(self):
        p = WeibullParams(a=20, b=3, gamma=0.5, delta=0.02)
        mid = p.gamma + (1 - p.delta - p.gamma) / 2
        assert invert_curve(p, mid, x_range=(0, 100)) == pytest.approx(20.0, abs=1e-9)

    def test_level_below_guess_rate_hits_at_zero(self):
        p = WeibullParams(a=20, b=3, gamma=0.5, delta=0.02)
        assert invert_curve(p, 0.3) == 0.0

    def test_level_validation(self):
        p = WeibullParams(a=20, b=3, gamma=0.5, delta=0.02)
        with pytest.raises(ValueError):
            invert_curve(p, 0.0)
        with pytest.raises(ValueError):
            invert_curve(p, 1.0)

    def test_sampled_curve_linear_interpolation(self):
        curve = CurveSamples([0.0, 10.0, 20.0], [0.5, 0.6, 0.8])
        assert invert_curve(curve, 0.7) == pytest.approx(15.0)
        assert invert_curve(curve, 0.5) == 0.0
        assert invert_curve(curve, 0.9) is NOT_REACHED

    def test_non_monotone_sampled_curve_rejected(self):
        curve = CurveSamples([0.0, 10.0, 20.0], [0.5, 0.8, 0.6])
        with pytest.raises(NonMonotoneCurveError):
            invert_curve(curve, 0.7)

    @given(st.integers(0, 17), st.integers(0, 49), st.integers(0, 95),
           st.floats(0.05, 0.95))
    @settings(max_examples=150, deadline=None)
    def test_round_trip_on_grid_cells(self, i, j, k, frac):
        g = build_grid()
        gamma = float(g.gamma_values[k])
        if gamma + g.delta >= 1:
            return
        p = WeibullParams(float(g.a_values[i]), float(g.b_values[j]), gamma, g.delta)
        level = gamma + frac * (1 - g.delta - gamma)
        if not 0 < level < 1:
            return
        x = invert_curve(p, level, x_range=(0, math.inf))
        assert x is not NOT_REACHED
        assert abs(eval_weibull(p, x) - level) < 1e-9


class TestCurveSamples:
    def test_requires_increasing_x(self):
        with pytest.raises(ValueError):
            CurveSamples([0.0, 0.0, 1.0], [0.1, 0.2, 0.3])

    def test_clamps_rounding_excursions(self):
        c = CurveSamples([0.0, 1.0], [-1e-15, 1.0 + 1e-15])
        assert c.y_values[0] == 0.0
        assert c.y_values[1] == 1.0

    def test_se_shape_checked(self):
        with pytest.raises(ValueError):
            CurveSamples([0.0, 1.0], [0.1, 0.2], [0.01])
