"""Analytic tail approximations, critical values, and skewness tables."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import norm

from rankscan import (
    PermPlan,
    SkewnessTable,
    TailConfig,
    critical_value,
    h_functions,
    nu_approx,
    null_third_moments,
    skewness_table,
    tail_M,
    tail_T,
    tail_probability,
)
from rankscan.errors import (
    ArgumentAtPole,
    EnumerationTooLarge,
    IndexOutOfRange,
    InvalidSampleCount,
    NegativeArgument,
)
from conftest import random_rank_matrix


def _nu_direct(x):
    # independent implementation of the overshoot correction
    half = x / 2.0
    num = (2.0 / x) * (norm.cdf(half) - 0.5)
    den = half * norm.cdf(half) + norm.pdf(half)
    return num / den


class TestNuApprox:
    def test_at_zero(self):
        assert nu_approx(0.0) == 1.0

    def test_matches_direct_formula(self):
        xs = np.array([0.1, 0.5, 1.0, 2.0, 3.5, 7.0])
        assert_allclose(nu_approx(xs), _nu_direct(xs), rtol=1e-12)

    def test_continuous_near_zero(self):
        assert_allclose(nu_approx(1e-9), 1.0, atol=1e-6)

    def test_monotone_decreasing(self):
        xs = np.linspace(0.0, 10.0, 200)
        vals = nu_approx(xs)
        assert (np.diff(vals) <= 1e-14).all()
        assert (vals > 0).all()

    def test_negative_rejected(self):
        with pytest.raises(NegativeArgument):
            nu_approx(-0.5)


class TestHFunctions:
    def test_known_values_at_half(self):
        n = 100
        h_w, h_d = h_functions(n, 0.5)
        assert_allclose(h_d, 2.0)
        assert_allclose(h_w, 4.0 * (n - 1) / (n - 2))

    def test_formula_spot_check(self):
        n, x = 50, 0.3
        h_w, h_d = h_functions(n, x)
        expect_w = ((n - 1) * (2 * n * x ** 2 - 2 * n * x + 1)
                    / (2 * x * (1 - x) * (n * x - 1) * (n * x - n + 1)))
        assert_allclose(h_w, expect_w, rtol=1e-12)
        assert_allclose(h_d, 1.0 / (2 * x * (1 - x)), rtol=1e-12)
        assert h_w > 0 and h_d > 0

    @pytest.mark.parametrize("x", [0.0, 1.0, 1.0 / 40, 1 - 1.0 / 40])
    def test_poles_rejected(self, x):
        with pytest.raises(ArgumentAtPole):
            h_functions(40, x)


class TestTailT:
    def test_decreasing_in_threshold(self):
        cfg = TailConfig(n=1000, statistic="T", window=(100, 900))
        bs = [8.0, 10.0, 13.0, 16.0, 20.0]
        tails = [tail_T(cfg, b) for b in bs]
        assert all(0.0 <= p <= 1.0 for p in tails)
        assert all(a >= b for a, b in zip(tails, tails[1:]))

    def test_interval_version(self):
        cfg = TailConfig(n=500, statistic="T", alternative="interval",
                         window=(25, 475))
        p = tail_T(cfg, 20.0)
        assert 0.0 <= p <= 1.0

    def test_refinement_is_stable(self):
        base = TailConfig(n=1000, statistic="T", window=(100, 900))
        fine = TailConfig(n=1000, statistic="T", window=(100, 900),
                          omega_nodes=128, x_nodes=512)
        for b in (12.0, 14.0):
            assert_allclose(tail_T(base, b), tail_T(fine, b), atol=1e-6)

    def test_statistic_mismatch(self):
        cfg = TailConfig(n=1000, statistic="M", window=(100, 900))
        with pytest.raises(ValueError):
            tail_T(cfg, 12.0)

    def test_threshold_validation(self):
        cfg = TailConfig(n=1000, statistic="T", window=(100, 900))
        with pytest.raises(ValueError):
            tail_T(cfg, 0.0)


class TestTailM:
    def test_decreasing_and_bounded(self):
        cfg = TailConfig(n=1000, statistic="M", window=(100, 900))
        bs = [2.0, 2.5, 3.0, 3.5, 4.0]
        tails = [tail_M(cfg, b) for b in bs]
        assert all(0.0 <= p <= 1.0 for p in tails)
        assert all(a >= b for a, b in zip(tails, tails[1:]))

    def test_far_tail_is_tiny(self):
        cfg = TailConfig(n=1000, statistic="M", window=(100, 900))
        assert tail_M(cfg, 60.0) < 1e-6

    def test_combines_both_components(self):
        # 1 - (1-p_w)(1-p_abs) lies above either component alone,
        # and below their sum
        from rankscan.analytic import _component_raw
        cfg = TailConfig(n=1000, statistic="M", window=(100, 900))
        b = 3.2
        p_w = _component_raw(cfg, b, "weighted", None, cfg.x_nodes)
        p_d = _component_raw(cfg, b, "diff", None, cfg.x_nodes)
        p_abs = min(2.0 * p_d, 1.0)
        p = tail_M(cfg, b)
        assert p >= max(p_w, p_abs) - 1e-9
        assert p <= p_w + p_abs + 1e-9

    def test_dispatch(self):
        cfg_t = TailConfig(n=800, statistic="T", window=(40, 760))
        cfg_m = TailConfig(n=800, statistic="M", window=(40, 760))
        assert tail_probability(cfg_t, 13.0) == tail_T(cfg_t, 13.0)
        assert tail_probability(cfg_m, 3.2) == tail_M(cfg_m, 3.2)


class TestTailConfig:
    def test_defaults_follow_scan_windows(self):
        cfg = TailConfig(n=1000, statistic="M")
        assert cfg.window == (50, 950)
        cfg_i = TailConfig(n=1000, statistic="M", alternative="interval")
        assert cfg_i.window == (50, 950)

    def test_statistic_normalized(self):
        cfg = TailConfig(n=400, statistic="m")
        assert cfg.statistic == "M"

    def test_window_validation(self):
        with pytest.raises(IndexOutOfRange):
            TailConfig(n=100, statistic="M", window=(0, 90))
        with pytest.raises(IndexOutOfRange):
            TailConfig(n=100, statistic="M", window=(5, 100))

    def test_skewness_requires_max_statistic(self):
        with pytest.raises(ValueError):
            TailConfig(n=100, statistic="T", skewness=True)

    def test_skew_table_required_when_enabled(self):
        cfg = TailConfig(n=100, statistic="M", skewness=True)
        with pytest.raises(ValueError):
            tail_M(cfg, 3.0)


class TestCriticalValue:
    def test_tail_at_critical_is_alpha(self):
        cfg = TailConfig(n=1000, statistic="M", window=(100, 900))
        b = critical_value(cfg, 0.05)
        assert_allclose(tail_M(cfg, b), 0.05, atol=2e-4)

    def test_monotone_in_alpha(self):
        cfg = TailConfig(n=1000, statistic="T", window=(100, 900))
        assert critical_value(cfg, 0.2) < critical_value(cfg, 0.05)

    def test_unbracketable_alpha(self):
        # the approximation is a large-deviation tail: at the smallest
        # admissible threshold it sits near 0.3, so moderate alphas
        # cannot be bracketed and must fail loudly instead of quietly
        # returning the endpoint
        from rankscan.errors import BracketFailure
        cfg = TailConfig(n=1000, statistic="T", window=(100, 900))
        with pytest.raises(BracketFailure):
            critical_value(cfg, 0.5)

    def test_alpha_validation(self):
        cfg = TailConfig(n=1000, statistic="T", window=(100, 900))
        with pytest.raises(ValueError):
            critical_value(cfg, 1.0)


class TestSkewnessTable:
    def test_monte_carlo_table_shape(self):
        r = random_rank_matrix(40, seed=0)
        table = skewness_table(r, window=(4, 36), n_perm=400, seed=1)
        assert table.lengths.tolist() == list(range(4, 37))
        assert table.gamma_weighted.shape == table.lengths.shape
        assert table.gamma_diff.shape == table.lengths.shape
        assert np.isfinite(table.gamma_weighted).all()
        assert "monte_carlo" in table.source

    def test_enumeration_matches_monte_carlo(self):
        r = random_rank_matrix(7, seed=2, k=3)
        exact = skewness_table(r, window=(2, 5), source="enumeration")
        assert "enumeration" in exact.source
        mc = skewness_table(r, window=(2, 5), n_perm=20000, seed=3)
        # MC standard error of a third moment is below ~0.05 at this B
        assert_allclose(mc.gamma_weighted, exact.gamma_weighted, atol=0.15)
        assert_allclose(mc.gamma_diff, exact.gamma_diff, atol=0.15)

    def test_enumeration_limit(self):
        r = random_rank_matrix(12, seed=4)
        with pytest.raises(EnumerationTooLarge):
            skewness_table(r, source="enumeration")

    def test_sample_count_validation(self):
        r = random_rank_matrix(12, seed=5)
        with pytest.raises(InvalidSampleCount):
            skewness_table(r, n_perm=0)

    def test_table_validation(self):
        with pytest.raises(ValueError):
            SkewnessTable(lengths=np.array([2, 3]),
                          gamma_weighted=np.array([0.1]),
                          gamma_diff=np.array([0.1, 0.2]),
                          source="test")
        with pytest.raises(ValueError):
            SkewnessTable(lengths=np.array([2, 3]),
                          gamma_weighted=np.array([0.1, np.nan]),
                          gamma_diff=np.array([0.1, 0.2]),
                          source="test")


class TestSkewnessCorrection:
    def _table(self, n, window, value_w, value_d):
        lengths = np.arange(window[0], window[1] + 1)
        return SkewnessTable(lengths=lengths,
                             gamma_weighted=np.full(lengths.shape, value_w),
                             gamma_diff=np.full(lengths.shape, value_d),
                             source="synthetic")

    def test_vanishing_skewness_recovers_uncorrected(self):
        cfg = TailConfig(n=500, statistic="M", window=(50, 450))
        cfg_s = TailConfig(n=500, statistic="M", window=(50, 450),
                           skewness=True)
        table = self._table(500, (50, 450), 1e-13, -1e-13)
        for b in (2.8, 3.3):
            assert_allclose(tail_M(cfg_s, b, table), tail_M(cfg, b),
                            rtol=1e-10)

    def test_positive_skewness_fattens_the_tail(self):
        # positively skewed nulls put more mass above a high threshold
        cfg = TailConfig(n=500, statistic="M", window=(50, 450))
        cfg_s = TailConfig(n=500, statistic="M", window=(50, 450),
                           skewness=True)
        table = self._table(500, (50, 450), 0.15, 0.15)
        b = 3.3
        assert tail_M(cfg_s, b, table) > tail_M(cfg, b)

    def test_corrected_critical_value_moves_up(self):
        cfg = TailConfig(n=500, statistic="M", window=(50, 450))
        cfg_s = TailConfig(n=500, statistic="M", window=(50, 450),
                           skewness=True)
        table = self._table(500, (50, 450), 0.15, 0.15)
        assert critical_value(cfg_s, 0.05, table) > critical_value(cfg, 0.05)

    def test_negative_skewness_with_clamped_region(self):
        # strongly negative third moments hit the tilt clamp; the tail
        # must stay finite, in range, and below the uncorrected one
        cfg = TailConfig(n=500, statistic="M", window=(50, 450))
        cfg_s = TailConfig(n=500, statistic="M", window=(50, 450),
                           skewness=True)
        table = self._table(500, (50, 450), -0.25, -0.25)
        b = 3.3
        p = tail_M(cfg_s, b, table)
        assert 0.0 <= p <= tail_M(cfg, b)

    def test_real_table_round_trip(self):
        r = random_rank_matrix(60, seed=6, d=3)
        table = skewness_table(r, window=(6, 54), n_perm=500, seed=7)
        cfg = TailConfig(n=60, statistic="M", window=(6, 54), skewness=True)
        p = tail_M(cfg, 3.1, table)
        assert 0.0 <= p <= 1.0


class TestGammaConsistency:
    def test_table_agrees_with_raw_third_moments(self):
        r = random_rank_matrix(30, seed=8)
        plan = PermPlan(n_perm=300, seed=9)
        table = skewness_table(r, window=(5, 25), n_perm=300, seed=9)
        gw, gd = null_third_moments(r, np.arange(5, 26), plan)
        assert_allclose(table.gamma_weighted, gw, rtol=1e-10)
        assert_allclose(table.gamma_diff, gd, rtol=1e-10)
