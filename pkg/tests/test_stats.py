"""Correlation tests, Student-t p-values, ADF, stationarity transform."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from causalift.dataset import InterventionEvent, TimeSeriesDataset, Variable
from causalift.stats import (
    AdfResult,
    CiResult,
    CollinearityError,
    DegenerateInputError,
    adf_test,
    default_adf_max_lag,
    difference,
    make_stationary,
    parcorr_test,
    partial_corr,
    pearson,
    t_two_sided_p,
)


def ar1(phi, n, rng, sigma=1.0):
    x = np.zeros(n)
    e = rng.normal(scale=sigma, size=n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def t_pdf(x, df):
    log_c = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
    return math.exp(log_c - (df + 1) / 2 * math.log1p(x * x / df))


class TestPearson:
    def test_frozen_reference_on_seeded_ar1_pair(self):
        rng = np.random.default_rng(12345)
        x = ar1(0.7, 1000, rng)
        y = 0.5 * x + ar1(0.3, 1000, rng)
        r = pearson(x, y)
        assert abs(r - 0.5501513171002257) < 1e-14
        assert abs(r - np.corrcoef(x, y)[0, 1]) < 1e-12

    def test_perfect_and_anti_correlation(self):
        x = np.arange(10.0)
        assert pearson(x, 3 * x + 1) == pytest.approx(1.0, abs=1e-12)
        assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)

    def test_constant_input_degenerate(self):
        x = np.ones(50)
        y = np.arange(50.0)
        with pytest.raises(DegenerateInputError, match="zero variance"):
            pearson(x, y)
        with pytest.raises(DegenerateInputError):
            pearson(y, np.full(50, 7.25))

    def test_near_constant_degenerate(self):
        y = np.arange(100.0)
        x = 5.0 + 1e-16 * np.sin(y)
        with pytest.raises(DegenerateInputError):
            pearson(x, y)

    def test_length_mismatch_and_nan(self):
        with pytest.raises(ValueError, match="length mismatch"):
            pearson(np.zeros(5), np.zeros(6))
        bad = np.arange(10.0)
        bad[3] = np.nan
        with pytest.raises(DegenerateInputError, match="non-finite"):
            pearson(bad, np.arange(10.0))


class TestPartialCorr:
    def test_k0_reduces_to_pearson_exactly(self):
        rng = np.random.default_rng(3)
        x, y = rng.normal(size=(2, 400))
        assert abs(partial_corr(x, y) - pearson(x, y)) < 1e-12
        assert abs(partial_corr(x, y, np.empty((400, 0))) - pearson(x, y)) < 1e-12

    def test_chain_vanishes_given_middle(self):
        # x -> z -> y: conditioning on z should kill the dependence.
        rng = np.random.default_rng(11)
        n = 5000
        x = rng.normal(size=n)
        z = 0.9 * x + 0.5 * rng.normal(size=n)
        y = 0.9 * z + 0.5 * rng.normal(size=n)
        assert abs(pearson(x, y)) > 0.4
        assert abs(partial_corr(x, y, z)) < 3.0 / math.sqrt(n)

    def test_collider_conditioning_creates_dependence(self):
        # x -> z <- y: marginally independent, dependent given the collider.
        rng = np.random.default_rng(12)
        n = 5000
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        z = x + y + 0.5 * rng.normal(size=n)
        assert abs(pearson(x, y)) < 3.0 / math.sqrt(n)
        assert abs(partial_corr(x, y, z)) > 0.1

    def test_symmetry_and_affine_invariance(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            n = 300
            Z = rng.normal(size=(n, 2))
            x = Z @ [0.5, -0.2] + rng.normal(size=n)
            y = Z @ [-0.3, 0.4] + rng.normal(size=n)
            r = partial_corr(x, y, Z)
            assert abs(r - partial_corr(y, x, Z)) < 1e-10
            assert abs(partial_corr(3.5 * x - 7.0, -0.02 * y + 4.0, Z) - (-r)) < 1e-10
            Z2 = Z * [2.0, -5.0] + [1.0, 3.0]
            assert abs(partial_corr(x, y, Z2) - r) < 1e-10

    def test_collinear_z_raises_naming_columns(self):
        rng = np.random.default_rng(4)
        n = 100
        z0 = rng.normal(size=n)
        Z = np.column_stack([z0, 2.0 * z0, rng.normal(size=n)])
        with pytest.raises(CollinearityError) as exc:
            partial_corr(rng.normal(size=n), rng.normal(size=n), Z)
        assert len(exc.value.offending) >= 1
        assert set(exc.value.offending) <= {0, 1, 2}

    def test_x_fully_explained_by_z_degenerate(self):
        rng = np.random.default_rng(5)
        z = rng.normal(size=200)
        x = 2.0 * z + 1.0
        y = rng.normal(size=200)
        with pytest.raises(DegenerateInputError):
            partial_corr(x, y, z)


class TestStudentT:
    def test_matches_quadrature_oracle(self):
        for df in (1, 2, 5, 10, 30, 100, 497):
            for t in (0.0, 0.5, 1.0, 2.0, 3.5, 8.0):
                tail, _ = quad(t_pdf, t, np.inf, args=(df,))
                assert abs(t_two_sided_p(t, df) - 2 * tail) < 1e-10, (df, t)

    def test_table_spot_values(self):
        # Classic two-sided critical points.
        assert t_two_sided_p(2.2281, 10) == pytest.approx(0.05, abs=1e-4)
        assert t_two_sided_p(1.96, 10**6) == pytest.approx(0.05, abs=1e-3)
        assert t_two_sided_p(3.169, 10) == pytest.approx(0.01, abs=1e-4)

    def test_infinite_statistic(self):
        assert t_two_sided_p(math.inf, 5) == 0.0


class TestParcorrTest:
    def test_perfect_correlation_p_zero(self):
        x = np.arange(100.0)
        res = parcorr_test(x, 2.0 * x)
        assert res.p_value == 0.0
        assert math.isinf(res.t_stat)
        assert res.statistic == pytest.approx(1.0)

    def test_matches_manual_t_formula(self):
        rng = np.random.default_rng(8)
        n = 200
        Z = rng.normal(size=(n, 3))
        x = rng.normal(size=n) + Z[:, 0]
        y = rng.normal(size=n) + Z[:, 0]
        res = parcorr_test(x, y, Z)
        r = partial_corr(x, y, Z)
        t = r * math.sqrt((n - 2 - 3) / (1 - r * r))
        assert res.statistic == pytest.approx(r, abs=1e-14)
        assert res.t_stat == pytest.approx(t, abs=1e-12)
        assert res.n == n and res.k == 3

    def test_null_calibration(self):
        # Independent Gaussians: rejection rate at alpha=0.01 stays near 0.01.
        rng = np.random.default_rng(99)
        reject = 0
        reps = 400
        for _ in range(reps):
            x = rng.normal(size=500)
            y = rng.normal(size=500)
            Z = rng.normal(size=(500, 3))
            if parcorr_test(x, y, Z).p_value < 0.01:
                reject += 1
        assert 0.002 <= reject / reps <= 0.03

    def test_too_few_samples(self):
        with pytest.raises(DegenerateInputError, match="n > k \\+ 2"):
            parcorr_test(np.arange(5.0), np.arange(5.0), np.ones((5, 3)))

    def test_ciresult_validation(self):
        with pytest.raises(DegenerateInputError):
            CiResult(statistic=0.5, t_stat=1.0, p_value=0.1, n=4, k=2)
        with pytest.raises(ValueError, match="p-value"):
            CiResult(statistic=0.5, t_stat=1.0, p_value=1.5, n=50, k=2)
        with pytest.raises(ValueError, match="correlation"):
            CiResult(statistic=1.5, t_stat=1.0, p_value=0.5, n=50, k=2)


class TestAdf:
    def test_response_surface_reproduces_published_critical_values(self):
        # Published ADF (constant) critical values: 1% -3.43, 5% -2.86, 10% -2.57.
        from causalift.stats import _adf_pvalue

        assert _adf_pvalue(-3.43) == pytest.approx(0.01, abs=1e-3)
        assert _adf_pvalue(-2.86) == pytest.approx(0.05, abs=1e-3)
        assert _adf_pvalue(-2.57) == pytest.approx(0.10, abs=5e-3)
        assert _adf_pvalue(-20.0) == 0.0
        assert _adf_pvalue(5.0) == 1.0

    def test_stationary_vs_random_walk(self):
        stat_rej = rw_rej = 0
        n_seeds = 25
        for s in range(n_seeds):
            rng = np.random.default_rng(500 + s)
            st = ar1(0.5, 1000, rng)
            rw = np.cumsum(rng.normal(size=1000))
            if adf_test(st).p_value < 0.01:
                stat_rej += 1
            if adf_test(rw).p_value < 0.01:
                rw_rej += 1
        assert stat_rej >= 22
        assert rw_rej <= 2

    def test_default_max_lag_rule(self):
        assert default_adf_max_lag(100) == 12
        assert default_adf_max_lag(8760) == 36
        assert default_adf_max_lag(1000) == 21

    def test_lag_selection_picks_up_short_memory(self):
        # AR(2) has dy autocorrelation; AIC should use at least one lag.
        rng = np.random.default_rng(77)
        n = 2000
        x = np.zeros(n)
        e = rng.normal(size=n)
        for t in range(2, n):
            x[t] = 1.2 * x[t - 1] - 0.4 * x[t - 2] + e[t]
        res = adf_test(x)
        assert res.used_lag >= 1
        assert res.n_obs == n - 1 - res.used_lag

    def test_constant_series_degenerate(self):
        with pytest.raises(DegenerateInputError, match="constant series"):
            adf_test(np.full(100, 3.0))

    def test_short_series_rejected(self):
        with pytest.raises(DegenerateInputError, match="too short"):
            adf_test(np.arange(5.0))


class TestDifference:
    def test_values_and_length(self):
        out = difference(np.array([1.0, 4.0, 9.0, 16.0]))
        np.testing.assert_array_equal(out, [3.0, 5.0, 7.0])
        assert out.dtype == np.float64
        assert len(out) == 3

    def test_too_short(self):
        with pytest.raises(DegenerateInputError):
            difference(np.array([1.0]))


class TestMakeStationary:
    def make(self, cols, names, interventions=()):
        return TimeSeriesDataset(
            values=np.column_stack(cols),
            variables=tuple(Variable(n) for n in names),
            interventions=interventions,
        )

    def test_differences_random_walk_keeps_stationary(self):
        rng = np.random.default_rng(42)
        n = 1200
        walk = np.cumsum(rng.normal(size=n))
        stat = ar1(0.4, n, rng)
        ds = self.make([walk, stat], ["walk", "stat"])
        out, report = make_stationary(ds, 0.01)
        assert report.differenced == ("walk",)
        assert report.rows_dropped == 1
        assert out.n_rows == n - 1
        np.testing.assert_allclose(out.column("walk"), np.diff(walk))
        np.testing.assert_allclose(out.column("stat"), stat[1:])

    def test_all_stationary_untouched(self):
        rng = np.random.default_rng(43)
        ds = self.make([ar1(0.3, 800, rng), ar1(0.5, 800, rng)], ["a", "b"])
        out, report = make_stationary(ds, 0.01)
        assert report.rows_dropped == 0
        assert report.differenced == ()
        np.testing.assert_array_equal(out.values, ds.values)

    def test_constant_column_skipped_and_reported(self):
        rng = np.random.default_rng(44)
        n = 900
        ds = self.make(
            [np.full(n, 22.0), np.cumsum(rng.normal(size=n))], ["setpoint", "walk"]
        )
        out, report = make_stationary(ds, 0.01)
        assert report.skipped == ("setpoint",)
        by_name = {c.name: c.action for c in report.columns}
        assert by_name["setpoint"] == "constant-skipped"
        assert report.differenced == ("walk",)
        np.testing.assert_array_equal(out.column("setpoint"), np.full(n - 1, 22.0))

    def test_setpoint_plateaus_held_not_differenced(self):
        # a held setpoint redrawn a few times has no stochastic trend; the
        # unit-root screen must not turn it into a sparse impulse train
        rng = np.random.default_rng(46)
        n = 2000
        col = np.empty(n)
        level = 21.0
        pos = 0
        for cut in (500, 900, 1700, n):
            col[pos:cut] = level
            level = float(rng.uniform(18, 27))
            pos = cut
        ds = self.make([col, ar1(0.4, n, rng)], ["setpoint", "stat"])
        out, report = make_stationary(ds, 0.01)
        by_name = {c.name: c.action for c in report.columns}
        assert by_name["setpoint"] == "step-skipped"
        assert by_name["stat"] == "none"
        assert report.rows_dropped == 0
        np.testing.assert_array_equal(out.column("setpoint"), col)

    def test_interventions_rebased_after_row_drop(self):
        rng = np.random.default_rng(45)
        n = 600
        walk = np.cumsum(rng.normal(size=n))
        events = (
            InterventionEvent(0, "walk", 1.0),
            InterventionEvent(100, "walk", 2.0),
        )
        ds = self.make([walk], ["walk"], interventions=events)
        out, report = make_stationary(ds, 0.01)
        assert report.rows_dropped == 1
        assert out.interventions == (InterventionEvent(99, "walk", 2.0),)

    def test_threshold_validated(self):
        ds = self.make([np.arange(100.0)], ["x"])
        with pytest.raises(ValueError, match="threshold"):
            make_stationary(ds, 0.0)
