"""Components and decisions of the individual-vs-grouped effects test."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_groups, random_panel
from panelvuong import (ModelSpec, bias_correction, classic_components,
                        fit_model, gaussian_fixed_scale, individual_groups,
                        make_panel, mqlr_classic, omega2_hybrid, pooled_groups,
                        run_classic_test, s2_gamma_unit, sigma2_cross_unit,
                        sigma2_gamma_unit, variance_components)
from panelvuong.classic import variance_u_regrouped
from panelvuong import normal_quantile
from panelvuong.errors import GroupingViolation
from panelvuong.panel import GroupMap, blocks_from_sizes


def fit_pair(panel, gmap2):
    """(individual-effects fit, grouped fit) under the unit-scale family."""
    spec1 = ModelSpec(gaussian_fixed_scale(panel.K), individual_groups(panel.n))
    spec2 = ModelSpec(gaussian_fixed_scale(panel.K), gmap2)
    return fit_model(panel, spec1), fit_model(panel, spec2)


def plus_minus_panel(n, base=0.0):
    """Each unit's outcomes are (c_i + 1, c_i - 1): unit residuals (1, -1)."""
    levels = base + np.arange(n, dtype=float)
    return make_panel(np.column_stack([levels + 1.0, levels - 1.0]))


def synthetic_fit(scores, gmap):
    """A fit object with prescribed score array, for testing the component
    operations in isolation (unit information fixed at -1)."""
    from panelvuong import FitResult

    scores = np.asarray(scores, dtype=float)
    return FitResult(theta=np.zeros(0), gamma=np.zeros((gmap.G, 1)), loglik=0.0,
                     loglik_obs=np.zeros_like(scores), score_gamma=scores,
                     info_gamma=np.full((gmap.G, 1), -1.0), converged=True,
                     iterations=0, spec=ModelSpec(gaussian_fixed_scale(0), gmap))


class TestPerUnitComponents:
    def test_sigma2_plus_minus_residuals(self):
        panel = plus_minus_panel(4)
        fit1, _ = fit_pair(panel, pooled_groups(4))
        for i in range(4):
            assert sigma2_gamma_unit(fit1, i) == pytest.approx(1.0)

    def test_sigma2_constant_residuals(self):
        panel = make_panel(np.outer(np.arange(4.0), np.ones(3)))
        fit1, _ = fit_pair(panel, pooled_groups(4))
        for i in range(4):
            assert sigma2_gamma_unit(fit1, i) == 0.0

    def test_model1_foc_makes_s2_equal_sigma2(self, rng):
        panel = random_panel(rng, 6, 5, 0)
        fit1, _ = fit_pair(panel, pooled_groups(6))
        for i in range(6):
            assert s2_gamma_unit(fit1, i) == pytest.approx(sigma2_gamma_unit(fit1, i))

    def test_s2_gap_from_nonzero_mean(self):
        # group mean zero but unit means +-1: model-2 scores (1,1) and (-1,-1)
        panel = make_panel(np.array([[1.0, 1.0], [-1.0, -1.0]]))
        _, fit2 = fit_pair(panel, pooled_groups(2))
        assert s2_gamma_unit(fit2, 0) == pytest.approx(1.0)
        assert sigma2_gamma_unit(fit2, 0) == pytest.approx(0.0)

    def test_s2_all_zero(self):
        panel = make_panel(np.outer(np.arange(3.0), np.ones(3)))
        fit1, _ = fit_pair(panel, individual_groups(3))
        assert s2_gamma_unit(fit1, 0) == 0.0

    def test_cross_identical_fits_is_sigma4(self, rng):
        panel = random_panel(rng, 5, 6, 0)
        fit1, fit2 = fit_pair(panel, individual_groups(5))
        for i in range(5):
            assert sigma2_cross_unit(fit1, fit2, i) == pytest.approx(
                sigma2_gamma_unit(fit1, i) ** 2)

    def test_cross_orthogonal_scores(self):
        # score sequences (1,-1) and (1,1) have inner product zero
        fit1 = synthetic_fit([[1.0, -1.0], [-1.0, 1.0]], individual_groups(2))
        fit2 = synthetic_fit([[1.0, 1.0], [-1.0, -1.0]], pooled_groups(2))
        assert sigma2_cross_unit(fit1, fit2, 0) == pytest.approx(0.0)

    def test_cross_zero_scores(self):
        panel = make_panel(np.outer(np.arange(3.0), np.ones(2)))
        fit1, fit2 = fit_pair(panel, individual_groups(3))
        assert sigma2_cross_unit(fit1, fit2, 0) == 0.0


class TestBiasCorrection:
    def test_individual_model_half_sum(self):
        panel = plus_minus_panel(10)
        fit1, _ = fit_pair(panel, pooled_groups(10))
        # all per-unit variances are 1, so the sum is n/2
        assert bias_correction(fit1) == pytest.approx(5.0)

    def test_single_group_of_size_n(self):
        panel = plus_minus_panel(10)
        _, fit2 = fit_pair(panel, pooled_groups(10))
        assert np.allclose([sigma2_gamma_unit(fit2, i) for i in range(10)], 1.0)
        assert bias_correction(fit2) == pytest.approx(0.5)

    def test_zero_residual_panel(self):
        panel = make_panel(np.outer(np.arange(4.0), np.ones(3)))
        fit1, _ = fit_pair(panel, individual_groups(4))
        assert bias_correction(fit1) == 0.0


class TestMqlr:
    def test_identical_models_exact_zero(self, rng):
        panel = random_panel(rng, 6, 5, 0)
        fit1, fit2 = fit_pair(panel, individual_groups(6))
        assert mqlr_classic(fit1, fit2) == 0.0

    def test_grouping_violation(self, rng):
        panel = random_panel(rng, 6, 5, 0)
        fit_coarse = fit_model(panel, ModelSpec(gaussian_fixed_scale(0),
                                                pooled_groups(6)))
        fit2 = fit_model(panel, ModelSpec(gaussian_fixed_scale(0),
                                          individual_groups(6)))
        with pytest.raises(GroupingViolation):
            mqlr_classic(fit_coarse, fit2)

    def test_sign_favors_model_one_under_heterogeneity(self, rng):
        # strong within-group heterogeneity: the individual model fits better
        n, T = 40, 40
        alpha = rng.normal(0, 2.0, n)
        y = alpha[:, None] + rng.normal(0, 1.0, (n, T))
        fit1, fit2 = fit_pair(make_panel(y), random_groups(rng, n, 4))
        assert mqlr_classic(fit1, fit2) > 0


class TestVarianceComponents:
    def test_identical_models_all_zero(self, rng):
        panel = random_panel(rng, 6, 5, 0)
        fit1, fit2 = fit_pair(panel, individual_groups(6))
        s_nt, s_u, s_s = variance_components(fit1, fit2, 0.0)
        assert s_nt == pytest.approx(0.0, abs=1e-14)
        assert s_u == pytest.approx(0.0, abs=1e-14)
        assert s_s == pytest.approx(0.0, abs=1e-14)

    def test_regrouped_identity(self, rng):
        panel = random_panel(rng, 50, 50, 0)
        fit1, fit2 = fit_pair(panel, random_groups(rng, 50, 6))
        mqlr = mqlr_classic(fit1, fit2)
        _, s_u, _ = variance_components(fit1, fit2, mqlr)
        assert variance_u_regrouped(fit1, fit2) == pytest.approx(s_u, abs=1e-12, rel=1e-12)

    def test_orthogonal_scores_s_formula(self):
        # per-unit score sequences orthogonal across models: the cross terms
        # vanish and sigma2_s reduces to the direct two-term sum
        scores1 = np.array([[1.0, -1.0], [-2.0, 2.0], [1.0, -1.0], [-1.0, 1.0]])
        scores2 = np.array([[1.0, 1.0], [2.0, 2.0], [-1.0, -1.0], [3.0, 3.0]])
        gmap2 = GroupMap(codes=np.array([0, 0, 1, 1]), G=2)
        fit1 = synthetic_fit(scores1, individual_groups(4))
        fit2 = synthetic_fit(scores2, gmap2)
        cross = np.array([sigma2_cross_unit(fit1, fit2, i) for i in range(4)])
        assert np.allclose(cross, 0.0, atol=1e-14)
        _, _, s_s = variance_components(fit1, fit2, 0.0)
        n, T = 4, 2
        v1 = np.array([sigma2_gamma_unit(fit1, i) for i in range(4)])
        s2 = np.array([s2_gamma_unit(fit2, i) for i in range(4)])
        v2 = np.array([sigma2_gamma_unit(fit2, i) for i in range(4)])
        sizes = np.array([2.0, 2.0, 2.0, 2.0])
        group_s2 = np.array([s2[:2].sum(), s2[:2].sum(), s2[2:].sum(), s2[2:].sum()])
        expected = (v1 ** 2 + v2 * group_s2 / sizes ** 2).sum() / (2 * n * T)
        assert s_s == pytest.approx(expected)


class TestOmega2Hybrid:
    def test_max_rule_binding(self):
        assert omega2_hybrid(0.5, 0.2, 0.5) == pytest.approx(0.2)

    def test_first_branch(self):
        assert omega2_hybrid(1.0, 0.1, 0.1) == pytest.approx(0.9)

    def test_all_zero(self):
        assert omega2_hybrid(0.0, 0.0, 0.0) == 0.0

    @given(st.floats(-1, 2), st.floats(0, 2), st.floats(0, 2))
    def test_never_below_sigma_u(self, s_nt, s_u, s_s):
        assert omega2_hybrid(s_nt, s_u, s_s) >= s_u


class TestRunClassicTest:
    def test_identical_models_degenerate(self, rng):
        panel = random_panel(rng, 6, 5, 0)
        spec = ModelSpec(gaussian_fixed_scale(0), individual_groups(6))
        report = run_classic_test(panel, spec, spec)
        assert report.degenerate
        assert report.degenerate_reason == "models indistinguishable"
        assert report.statistic is None
        assert report.reject_two is None

    def test_time_blocks_rejected(self, rng):
        panel = random_panel(rng, 6, 6, 0)
        spec1 = ModelSpec(gaussian_fixed_scale(0), individual_groups(6))
        spec2 = ModelSpec(gaussian_fixed_scale(0), pooled_groups(6),
                          blocks_from_sizes([3, 3]))
        with pytest.raises(GroupingViolation):
            run_classic_test(panel, spec1, spec2)

    def test_coarse_model1_rejected(self, rng):
        panel = random_panel(rng, 6, 5, 0)
        spec1 = ModelSpec(gaussian_fixed_scale(0), pooled_groups(6))
        with pytest.raises(GroupingViolation):
            run_classic_test(panel, spec1, spec1)

    def test_pvalues_match_statistic(self, rng):
        panel = random_panel(rng, 20, 15, 1)
        spec1 = ModelSpec(gaussian_fixed_scale(1), individual_groups(20))
        spec2 = ModelSpec(gaussian_fixed_scale(1), random_groups(rng, 20, 4))
        report = run_classic_test(panel, spec1, spec2, level=0.05)
        assert 0.0 <= report.p_two_sided <= 1.0
        assert report.reject_two == (abs(report.statistic) > normal_quantile(0.975))
        assert report.reject_one == (report.statistic > normal_quantile(0.95))

    def test_label_invariance_within_groups(self, rng):
        panel = random_panel(rng, 8, 6, 0)
        gmap = GroupMap(codes=np.array([0, 0, 0, 0, 1, 1, 1, 1]), G=2)
        fit1, fit2 = fit_pair(panel, gmap)
        comp = classic_components(fit1, fit2)
        perm = np.array([2, 3, 0, 1, 7, 6, 5, 4])   # shuffles within groups
        panel_p = make_panel(panel.y[perm])
        fit1p, fit2p = fit_pair(panel_p, gmap)
        comp_p = classic_components(fit1p, fit2p)
        for name in ("loglik_1", "loglik_2", "r_1", "r_2", "qlr", "mqlr",
                     "sigma2_nt", "sigma2_u", "sigma2_s", "omega2"):
            assert getattr(comp, name) == pytest.approx(getattr(comp_p, name),
                                                        abs=1e-10)

    def test_decision_monotone_in_level(self, rng):
        panel = random_panel(rng, 15, 10, 0)
        spec1 = ModelSpec(gaussian_fixed_scale(0), individual_groups(15))
        spec2 = ModelSpec(gaussian_fixed_scale(0), random_groups(rng, 15, 3))
        reports = [run_classic_test(panel, spec1, spec2, level=p)
                   for p in (0.01, 0.05, 0.10, 0.20)]
        for tighter, looser in zip(reports, reports[1:]):
            if tighter.reject_two:
                assert looser.reject_two

    def test_positivity_on_random_panels(self, rng):
        for _ in range(50):
            n = int(rng.integers(6, 20))
            T = int(rng.integers(4, 16))
            panel = random_panel(rng, n, T, int(rng.integers(0, 2)))
            gmap = random_groups(rng, n, int(rng.integers(1, 5)))
            fit1, fit2 = fit_pair(panel, gmap)
            comp = classic_components(fit1, fit2)
            assert comp.sigma2_u >= -1e-14
            assert comp.sigma2_s >= -1e-14
            assert comp.omega2 >= comp.sigma2_u - 1e-14
            assert np.all(comp.s2_2 >= comp.sigma2_2 - 1e-12)
            assert np.all(comp.sigma2_12 <= comp.sigma2_1 * comp.sigma2_2
                          + 1e-14 * np.maximum(1.0, comp.sigma2_1 * comp.sigma2_2))

    def test_warning_records_independence_assumption(self, rng):
        panel = random_panel(rng, 8, 6, 0)
        spec1 = ModelSpec(gaussian_fixed_scale(0), individual_groups(8))
        spec2 = ModelSpec(gaussian_fixed_scale(0), pooled_groups(8))
        report = run_classic_test(panel, spec1, spec2)
        assert any("serially independent" in w for w in report.warnings)
