import io
import math
import warnings
from fractions import Fraction

import pytest

from condwalk.brownian import rayleigh_cdf
from condwalk.errors import (CellBudgetExceeded, DegenerateVariance,
                             DomainError, ExtinctAtHorizon, NonLatticeInput,
                             NotConverged, NotIrreducible)
from condwalk.exact import (EXACT_RATIONAL, FLOAT, StepCDF, as_rational,
                            asymptotic_variance, classify_domain,
                            conditional_law_dp, harmonic_value_dp,
                            stationary_distribution, survival_dp,
                            variance_series, walk_lattice)
from condwalk.models import load_model
from helpers import enumerate_survival

# Frozen by the exit-payload linear system at tol 1e-8; the doubling
# cutoff run converged with spread below 1e-11 in every case.
V_FROZEN = {
    ("-3", 2): 2.577287007643535,
    ("7/6", 1): 0.8300469778362334,
    ("7/6", 100): 99.3536056124881,
}


class TestStationaryAndVariance:
    def test_stationary_exact(self, chain4):
        nu = stationary_distribution(chain4)
        assert nu == [Fraction(2, 15), Fraction(4, 15), Fraction(1, 5),
                      Fraction(2, 5)]

    def test_not_irreducible(self):
        model = load_model({"type": "finite",
                            "states": [{"label": "a", "f": "1"},
                                       {"label": "b", "f": "-1"}],
                            "P": [["1", "0"], ["0", "1"]]})
        with pytest.raises(NotIrreducible, match="strongly connected"):
            stationary_distribution(model.spec)

    def test_variance_exact_rational(self, chain4):
        nu = stationary_distribution(chain4)
        assert asymptotic_variance(chain4, nu) == Fraction(53, 90)

    def test_variance_float_series_agrees(self, chain4):
        nu = stationary_distribution(chain4)
        exact = float(asymptotic_variance(chain4, nu))
        assert variance_series(chain4, nu) == pytest.approx(exact, abs=1e-10)

    def test_degenerate_variance(self):
        model = load_model({"type": "finite",
                            "states": [{"label": "a", "f": "0"},
                                       {"label": "b", "f": "0"}],
                            "P": [["1/2", "1/2"], ["1/2", "1/2"]]})
        nu = stationary_distribution(model.spec)
        with pytest.raises(DegenerateVariance, match="sigma"):
            asymptotic_variance(model.spec, nu)

    def test_noncentered_rejected(self, chain4):
        model = load_model({"type": "finite",
                            "states": [{"label": "a", "f": "1"},
                                       {"label": "b", "f": "1"}],
                            "P": [["1/2", "1/2"], ["1/2", "1/2"]]})
        nu = stationary_distribution(model.spec)
        with pytest.raises(ValueError, match="centered"):
            asymptotic_variance(model.spec, nu)


class TestRationalInputs:
    @pytest.mark.parametrize("value,expected", [
        ("7/6", Fraction(7, 6)),
        (3, Fraction(3)),
        (Fraction(-1, 2), Fraction(-1, 2)),
    ])
    def test_exact_values_pass_through(self, value, expected):
        assert as_rational(value) == expected

    def test_float_rejected_in_exact_mode(self):
        with pytest.raises(NonLatticeInput, match="rational"):
            as_rational(0.123456789)

    def test_float_binned_in_float_mode(self):
        got = as_rational(0.123456789, float_mode=True)
        assert got.denominator <= 10000
        assert abs(got - Fraction(123456789, 1000000000)) < Fraction(1, 10000)

    def test_walk_lattice_spacing(self, chain4):
        L, k0, shifts = walk_lattice(chain4, Fraction(2))
        assert L == 6
        assert k0 == 12
        assert shifts == [-6, 6, -18, 7]


class TestSurvivalExact:
    # closed-form geometric regime: each alive path has one viable
    # continuation of probability 1/2 per step
    @pytest.mark.parametrize("x,y", [("1", 2), ("-1", "3/2")])
    def test_geometric_curve(self, chain4, x, y):
        curve, _ = survival_dp(chain4, x, y, 30, EXACT_RATIONAL)
        for n in range(31):
            assert curve.p[n] == Fraction(1, 2 ** n)

    def test_start_cell_exempt(self, chain4):
        # y = 0 is non-positive but only steps >= 1 can exit
        curve, _ = survival_dp(chain4, "-1", 0, 4, EXACT_RATIONAL)
        assert curve.p == (1, Fraction(1, 2), 0, 0, 0)

    def test_conservation(self, chain4):
        curve, _ = survival_dp(chain4, "-3", 2, 24, EXACT_RATIONAL)
        assert curve.p[24] + sum(curve.exit_mass) == 1

    def test_monotone_in_n_and_y(self, chain4):
        curve, _ = survival_dp(chain4, "-3", 2, 16, EXACT_RATIONAL)
        assert all(a >= b for a, b in zip(curve.p, curve.p[1:]))
        lo, _ = survival_dp(chain4, "-3", 2, 12, EXACT_RATIONAL)
        hi, _ = survival_dp(chain4, "-3", 8, 12, EXACT_RATIONAL)
        assert all(a <= b for a, b in zip(lo.p, hi.p))

    @pytest.mark.parametrize("x,y", [("-3", 2), ("7/6", 1), ("-1", 0),
                                     ("1", "1/2")])
    def test_matches_path_enumeration(self, chain4, x, y):
        curve, _ = survival_dp(chain4, x, y, 12, EXACT_RATIONAL)
        p, e = enumerate_survival(chain4, x, y, 12)
        assert curve.p == p
        assert curve.e == e

    def test_float_mode_agrees(self, chain4):
        exact, _ = survival_dp(chain4, "-3", 2, 64, EXACT_RATIONAL)
        flt, _ = survival_dp(chain4, "-3", 2, 64, FLOAT)
        for pe, pf in zip(exact.p, flt.p):
            assert pf == pytest.approx(float(pe), abs=1e-13)

    def test_frontier_mass_equals_final_p(self, chain4):
        curve, frontier = survival_dp(chain4, "-3", 2, 10, EXACT_RATIONAL)
        assert frontier.total_mass() == curve.p[10]

    def test_csv_round_trip_exact(self, chain4):
        curve, _ = survival_dp(chain4, "1", 2, 3, EXACT_RATIONAL)
        buf = io.StringIO()
        curve.write_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "n,p_n,e_n,exit_mass_n"
        assert lines[1] == "0,1,2,0"
        assert lines[2] == "1,1/2,1/2,1/2"

    def test_cell_budget_enforced(self, chain4):
        with pytest.raises(CellBudgetExceeded, match="budget"):
            survival_dp(chain4, "-3", 2, 64, EXACT_RATIONAL, cell_budget=10)
        with pytest.raises(CellBudgetExceeded, match="budget"):
            survival_dp(chain4, "-3", 2, 4096, FLOAT, cell_budget=100)

    def test_bad_mode_and_horizon(self, chain4):
        with pytest.raises(ValueError, match="unknown mode"):
            survival_dp(chain4, "-3", 2, 4, "fancy")
        with pytest.raises(ValueError, match="n_max"):
            survival_dp(chain4, "-3", 2, -1)


class TestConditionalLaw:
    def test_proper_cdf(self, chain4):
        cdf = conditional_law_dp(chain4, "7/6", 1, 64)
        assert cdf.cdf[-1] == pytest.approx(1.0, abs=1e-12)
        assert all(b >= a for a, b in zip(cdf.cdf, cdf.cdf[1:]))
        assert all(t > 0 for t in cdf.atoms)

    def test_extinct_start_raises(self, chain4):
        with pytest.raises(ExtinctAtHorizon, match="0 at n"):
            conditional_law_dp(chain4, "1", "1/2", 4)

    def test_sup_distance_single_atom(self):
        cdf = StepCDF(atoms=(1.0,), weights=(1.0,))
        want = max(rayleigh_cdf(1.0), 1.0 - rayleigh_cdf(1.0))
        assert cdf.sup_distance(rayleigh_cdf) == pytest.approx(want)

    def test_evaluate_steps(self):
        cdf = StepCDF(atoms=(1.0, 2.0), weights=(0.25, 0.75))
        assert cdf.evaluate(0.5) == 0.0
        assert cdf.evaluate(1.0) == 0.25
        assert cdf.evaluate(1.5) == 0.25
        assert cdf.evaluate(2.5) == 1.0

    def test_rayleigh_distance_shrinks(self, chain4):
        d256 = conditional_law_dp(chain4, "7/6", 1, 256).sup_distance(
            rayleigh_cdf)
        d1024 = conditional_law_dp(chain4, "7/6", 1, 1024).sup_distance(
            rayleigh_cdf)
        assert d1024 < d256


class TestHarmonicValue:
    @pytest.mark.parametrize("x,y", sorted(V_FROZEN))
    def test_exit_system_frozen_values(self, chain4, x, y):
        est = harmonic_value_dp(chain4, x, y)
        assert est.method == "EXIT_SYSTEM"
        assert est.value == pytest.approx(V_FROZEN[(x, y)], abs=1e-8)
        assert est.error_bound <= 1e-8

    def test_zero_on_dead_domain(self, chain4):
        # (1, 3) cannot reach the growth region; V = 0
        est = harmonic_value_dp(chain4, "1", 3)
        assert abs(est.value) <= 1e-12

    def test_dp_limit_agrees(self, chain4):
        sys = harmonic_value_dp(chain4, "7/6", 1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotConverged)
            dp = harmonic_value_dp(chain4, "7/6", 1, method="DP_LIMIT",
                                   n_cap=2048)
        assert abs(dp.value - sys.value) <= dp.error_bound + 1e-8

    def test_dp_limit_extinct_is_exact_zero(self, chain4):
        est = harmonic_value_dp(chain4, "-1", 0, method="DP_LIMIT")
        assert est.value == 0.0
        assert est.error_bound == 0.0

    def test_dp_limit_geometric_clamp(self, chain4):
        # survival halves every step; the clamp should recognize it
        est = harmonic_value_dp(chain4, "1", 3, method="DP_LIMIT")
        assert est.value == 0.0

    def test_dp_limit_early_cauchy_still_covered(self, chain4):
        # e_1 = e_2 = 1/2 exactly, so the Cauchy gap closes at once with
        # a coarse value; the reported bias bound must cover V = 0
        est = harmonic_value_dp(chain4, "1", 2, method="DP_LIMIT")
        assert abs(est.value) <= est.error_bound

    def test_dp_limit_warns_at_cap(self, chain4):
        with pytest.warns(NotConverged, match="n_cap"):
            est = harmonic_value_dp(chain4, "-3", 2, method="DP_LIMIT",
                                    n_cap=64)
        # the rigorous bias bound still covers the true value
        assert abs(est.value - V_FROZEN[("-3", 2)]) <= est.error_bound

    def test_monotone_in_y(self, chain4):
        values = [harmonic_value_dp(chain4, "7/6", y).value
                  for y in ("1/2", 1, 2, 4, 8, 16)]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_nonnegative_everywhere(self, chain4):
        for x in chain4.labels:
            for y in (0, 1, 5):
                assert harmonic_value_dp(chain4, x, y).value >= -1e-12

    def test_unknown_method(self, chain4):
        with pytest.raises(ValueError, match="EXIT_SYSTEM or DP_LIMIT"):
            harmonic_value_dp(chain4, "-3", 2, method="GUESS")


class TestClassifyDomain:
    def test_extinction_step_recorded(self, chain4):
        dc = classify_domain(chain4, [("-1", 0)], 3, 64)
        point = dc.points[0]
        assert point.verdict == "ZERO_EXPONENTIAL"
        assert point.extinct_at == 2

    def test_decay_rate_matches_geometric_curve(self, chain4):
        dc = classify_domain(chain4, [("-1", 2)], 3, 64)
        point = dc.points[0]
        assert point.verdict == "ZERO_EXPONENTIAL"
        assert point.decay_rate == pytest.approx(math.log(2), rel=1e-6)

    def test_witness_found_fast(self, chain4):
        dc = classify_domain(chain4, [("-3", 2)], 3, 64)
        assert dc.points[0].verdict == "POSITIVE"
        assert dc.points[0].n0 >= 1

    def test_horizon_too_small_is_unknown(self, chain4):
        dc = classify_domain(chain4, [("-3", 2)], 10, 1)
        assert dc.points[0].verdict == "UNKNOWN"

    def test_verdict_lookup(self, chain4):
        dc = classify_domain(chain4, [("-3", 2), ("-1", 0)], 3, 64)
        assert dc.verdict("-3", 2).verdict == "POSITIVE"
        assert dc.verdict("-1", 0).verdict == "ZERO_EXPONENTIAL"
        with pytest.raises(KeyError):
            dc.verdict("1", 9)

    def test_gamma_must_be_positive(self, chain4):
        with pytest.raises(DomainError, match="gamma"):
            classify_domain(chain4, [("-3", 2)], 0, 64)

    def test_horizon_must_be_positive(self, chain4):
        with pytest.raises(ValueError, match="horizon"):
            classify_domain(chain4, [("-3", 2)], 3, 0)
