import itertools

import numpy as np
import pytest

from markedcusum import (ContractError, MultiplierSpec, Sample,
                         bootstrap_sample, bootstrap_statistic,
                         brute_force_grid, build_grid, compute_statistic,
                         get_kernel, nw_fit, run_bootstrap,
                         run_bootstrap_multi)
from markedcusum.bootstrap import ResamplingEngine
from markedcusum.process import ProcessGrid

from conftest import fitted_fixture, synthetic_fit


class TestMultipliers:
    @pytest.mark.parametrize("family", ["rademacher", "mammen_two_point",
                                        "standard_normal"])
    def test_first_two_moments(self, family):
        draws = MultiplierSpec(family).draw(np.random.default_rng(0), 1_000_000)
        assert abs(draws.mean()) < 0.004
        assert abs(draws.var() - 1.0) < 0.01

    def test_rademacher_support(self):
        draws = MultiplierSpec("rademacher").draw(np.random.default_rng(1), 10_000)
        assert set(np.unique(draws)) == {-1.0, 1.0}
        assert np.all(draws**4 == 1.0)

    def test_mammen_third_moment(self):
        draws = MultiplierSpec("mammen_two_point").draw(np.random.default_rng(2),
                                                        1_000_000)
        assert abs((draws**3).mean() - 1.0) < 0.02
        assert np.unique(draws).size == 2

    def test_unknown_family(self):
        with pytest.raises(ContractError):
            MultiplierSpec("uniform")


class TestBootstrapSample:
    def test_zero_multipliers_reproduce_fitted(self, kernel4):
        fit = fitted_fixture(np.random.default_rng(3), 25, 1)
        star = bootstrap_sample(fit, np.zeros(fit.n))
        np.testing.assert_array_equal(star.y, fit.fitted)
        np.testing.assert_array_equal(star.x, fit.sample.x)

    def test_unit_multipliers_reproduce_data(self):
        fit = fitted_fixture(np.random.default_rng(4), 25, 1)
        star = bootstrap_sample(fit, np.ones(fit.n))
        np.testing.assert_allclose(star.y, fit.sample.y, rtol=1e-14)

    def test_rademacher_two_point_support(self):
        fit = fitted_fixture(np.random.default_rng(5), 30, 1)
        eta = MultiplierSpec("rademacher").draw(np.random.default_rng(6), fit.n)
        star = bootstrap_sample(fit, eta)
        lo = fit.fitted - fit.residuals
        hi = fit.fitted + fit.residuals
        for i in range(fit.n):
            assert (abs(star.y[i] - lo[i]) < 1e-12 or
                    abs(star.y[i] - hi[i]) < 1e-12)

    def test_length_mismatch(self):
        fit = fitted_fixture(np.random.default_rng(7), 10, 1)
        with pytest.raises(ContractError):
            bootstrap_sample(fit, np.ones(9))


class TestBootstrapStatistic:
    def test_unit_multipliers_reproduce_observed(self):
        fit = fitted_fixture(np.random.default_rng(8), 30, 1)
        observed = compute_statistic(build_grid(fit), "tn1", fit=fit).value
        replicated = bootstrap_statistic(fit, "tn1", np.ones(fit.n))
        assert abs(replicated - observed) < 1e-12

    def test_zero_multipliers_match_smoothed_pipeline(self):
        fit = fitted_fixture(np.random.default_rng(9), 25, 1)
        value = bootstrap_statistic(fit, "tn2", np.zeros(fit.n))
        smoothed = Sample(x=fit.sample.x, y=fit.fitted.copy())
        refit = nw_fit(smoothed, fit.kernel, fit.h, fit.window)
        oracle = compute_statistic(brute_force_grid(refit), "tn2", fit=refit).value
        assert abs(value - oracle) < 1e-12

    @pytest.mark.parametrize("kind", ["tn1", "tn2", "tn3", "tn4", "ks", "cm"])
    def test_matches_brute_force_oracle(self, kind):
        fit = fitted_fixture(np.random.default_rng(10), 22, 1, hetero=True)
        eta = MultiplierSpec("mammen_two_point").draw(np.random.default_rng(11), fit.n)
        value = bootstrap_statistic(fit, kind, eta)
        star = bootstrap_sample(fit, eta)
        refit = nw_fit(star, fit.kernel, fit.h, fit.window)
        oracle = compute_statistic(brute_force_grid(refit), kind, fit=refit).value
        assert abs(value - oracle) < 1e-12


class TestEngine:
    def test_engine_matches_naive_path(self):
        fit = fitted_fixture(np.random.default_rng(12), 30, 2)
        engine = ResamplingEngine(fit)
        rng = np.random.default_rng(13)
        kinds = ["tn1", "tn2", "tn3", "tn4", "ks", "cm"]
        for _ in range(3):
            eta = rng.standard_normal(fit.n)
            fast = engine.statistics_for(fit.fitted + fit.residuals * eta, kinds)
            for kind in kinds:
                assert abs(fast[kind] - bootstrap_statistic(fit, kind, eta)) < 1e-12

    def test_engine_observed_matches_grid(self):
        fit = fitted_fixture(np.random.default_rng(14), 40, 1)
        engine = ResamplingEngine(fit)
        grid = build_grid(fit)
        fast = engine.statistics_for(fit.sample.y, ["tn1", "tn2", "ks", "cm"])
        for kind, value in fast.items():
            assert value == compute_statistic(grid, kind, fit=fit).value


class TestRunBootstrap:
    def test_requires_minimum_replications(self):
        fit = fitted_fixture(np.random.default_rng(15), 15, 1)
        with pytest.raises(ContractError):
            run_bootstrap(fit, "tn1", B=5, alpha=0.05)

    def test_zero_residual_fit_never_rejects(self):
        fit = synthetic_fit(np.zeros(20))
        run = run_bootstrap(fit, "tn1", B=25, alpha=0.05, seed=1)
        assert run.p_value == 1.0 and not run.reject and run.observed == 0.0

    def test_p_value_in_unit_interval_and_seeded(self):
        fit = fitted_fixture(np.random.default_rng(16), 30, 1)
        r1 = run_bootstrap(fit, "tn1", B=50, alpha=0.05, seed=42)
        r2 = run_bootstrap(fit, "tn1", B=50, alpha=0.05, seed=42)
        assert 0.0 < r1.p_value <= 1.0
        assert r1.p_value == r2.p_value
        np.testing.assert_array_equal(r1.values, r2.values)

    def test_p_value_formula(self):
        fit = fitted_fixture(np.random.default_rng(17), 25, 1)
        run = run_bootstrap(fit, "ks", B=33, alpha=0.05, seed=3)
        expected = (1.0 + np.sum(run.values >= run.observed)) / (33 + 1.0)
        assert run.p_value == expected

    def test_decision_consistent_with_critical_value(self):
        fit = fitted_fixture(np.random.default_rng(18), 25, 1)
        for kind in ("tn1", "cm"):
            run = run_bootstrap(fit, kind, B=40, alpha=0.10, seed=4)
            assert run.reject == (run.observed > run.critical_value)

    def test_multi_shares_replications(self):
        fit = fitted_fixture(np.random.default_rng(19), 25, 1)
        multi = run_bootstrap_multi(fit, ["tn1", "ks"], B=30, alpha=0.05, seed=5)
        single = run_bootstrap(fit, "tn1", B=30, alpha=0.05, seed=5)
        np.testing.assert_array_equal(multi["tn1"].values, single.values)


def test_conditional_centering_by_enumeration():
    # averaging the pre-refit bootstrap process over all Rademacher sign
    # assignments cancels every lattice cell
    resid = np.array([0.7, -1.1, 0.4, 0.9])
    total = None
    for signs in itertools.product([-1.0, 1.0], repeat=4):
        fit = synthetic_fit(resid * np.asarray(signs))
        grid = build_grid(fit)
        total = grid.values if total is None else total + grid.values
    np.testing.assert_allclose(total / 16.0, 0.0, atol=1e-15)
