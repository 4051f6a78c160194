import math

import pytest

from condwalk.errors import NoSurvivors
from condwalk.exact import (EXACT_RATIONAL, asymptotic_variance,
                            conditional_law_dp, stationary_distribution,
                            survival_dp)
from condwalk.mc import (affine1d_variance, berry_esseen_diag,
                         conditional_law_mc, estimate_survival,
                         estimate_variance, survival_curve_mc)

SIGMA4 = math.sqrt(53.0 / 90.0)


class TestSurvivalMC:
    @pytest.mark.parametrize("n", [4, 16, 64, 256])
    def test_matches_exact_dp(self, model4, chain4, n):
        curve, _ = survival_dp(chain4, "-3", 2, n, EXACT_RATIONAL)
        truth = float(curve.p[n])
        est = estimate_survival(model4, "-3", 2, n, 20_000, seed=99)
        assert abs(est.value - truth) <= 4 * est.se + 1e-9

    def test_curve_shares_one_path_set(self, model4):
        # draws are keyed by (seed, path, step), so the 1024-horizon
        # count is identical whether or not the run continues to 2048
        both = survival_curve_mc(model4, "-3", 2, [1024, 2048], 5000, seed=3)
        solo = estimate_survival(model4, "-3", 2, 1024, 5000, seed=3)
        assert both[0].value == solo.value
        assert both[1].value <= both[0].value

    def test_thread_count_invariant(self, model4):
        a = estimate_survival(model4, "-3", 2, 64, 30_000, seed=5, threads=1)
        b = estimate_survival(model4, "-3", 2, 64, 30_000, seed=5, threads=8)
        assert a.value == b.value and a.se == b.se

    def test_seed_reproducible(self, affine_model):
        a = estimate_survival(affine_model, 0.0, 2.0, 64, 10_000, seed=5)
        b = estimate_survival(affine_model, 0.0, 2.0, 64, 10_000, seed=5)
        c = estimate_survival(affine_model, 0.0, 2.0, 64, 10_000, seed=6)
        assert a.value == b.value
        assert a.value != c.value

    def test_binomial_se(self, model4):
        est = estimate_survival(model4, "-3", 2, 16, 10_000, seed=1)
        want = math.sqrt(est.value * (1 - est.value) / 10_000)
        assert est.se == pytest.approx(want)
        assert est.n_samples == 10_000

    def test_input_validation(self, model4):
        with pytest.raises(ValueError, match="n_samples"):
            estimate_survival(model4, "-3", 2, 4, 0)
        with pytest.raises(ValueError, match="horizons"):
            survival_curve_mc(model4, "-3", 2, [], 100)
        with pytest.raises(ValueError, match="horizons"):
            survival_curve_mc(model4, "-3", 2, [-1, 4], 100)


class TestConditionalLawMC:
    def test_close_to_exact_conditional_law(self, model4, chain4):
        dp = conditional_law_dp(chain4, "-3", 2, 64)
        mc, survivors = conditional_law_mc(model4, "-3", 2, 64, 50_000,
                                           SIGMA4, seed=13)
        assert survivors > 10_000
        worst = max(abs(mc.evaluate(t) - dp.evaluate(t)) for t in dp.atoms)
        assert worst <= 0.03

    def test_no_survivors(self, model4):
        with pytest.raises(NoSurvivors, match="survived"):
            conditional_law_mc(model4, "1", 0.5, 4, 1000, SIGMA4, seed=1)

    def test_weights_sum_to_one(self, affine_model):
        cdf, survivors = conditional_law_mc(affine_model, 0.0, 2.0, 32,
                                            20_000, 2.0 / 3.0, seed=2)
        assert 0 < survivors < 20_000
        assert sum(cdf.weights) == pytest.approx(1.0, abs=1e-12)
        assert cdf.cdf[-1] == pytest.approx(1.0, abs=1e-12)


class TestFreeWalkDiagnostics:
    def test_normal_distance_small_and_shrinking(self, model4):
        d64 = berry_esseen_diag(model4, "7/6", 64, 40_000, SIGMA4, seed=21)
        d1024 = berry_esseen_diag(model4, "7/6", 1024, 40_000, SIGMA4,
                                  seed=21)
        assert 0 < d1024 < d64 < 0.1

    def test_variance_matches_exact(self, model4, chain4):
        nu = stationary_distribution(chain4)
        truth = float(asymptotic_variance(chain4, nu))
        est = estimate_variance(model4, "7/6", 256, 20_000, seed=31)
        assert abs(est.value - truth) <= 4 * est.se
        assert est.se > 0

    def test_variance_affine_closed_form(self, affine_model):
        truth = affine1d_variance(affine_model)
        assert truth == pytest.approx(4.0 / 9.0, rel=1e-12)
        est = estimate_variance(affine_model, 0.0, 256, 20_000, seed=31)
        assert abs(est.value - truth) <= 4 * est.se

    def test_affine_variance_needs_affine(self, model4):
        with pytest.raises(TypeError, match="affine"):
            affine1d_variance(model4)

    def test_input_validation(self, model4):
        with pytest.raises(ValueError, match="sigma"):
            berry_esseen_diag(model4, "7/6", 4, 100, 0.0)
        with pytest.raises(ValueError, match="n must be"):
            berry_esseen_diag(model4, "7/6", 0, 100, 1.0)
        with pytest.raises(ValueError, match="n_samples"):
            estimate_variance(model4, "7/6", 4, 1)
