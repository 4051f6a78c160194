import io
from fractions import Fraction

import numpy as np
import pytest

from condwalk.errors import (IdentityViolation, SingularBeyondNullspace,
                             TooManyCensored)
from condwalk.exact import harmonic_value_dp
from condwalk.martingale import (_estimate,
                                 collect_exit_triples, estimate_V_martingale,
                                 estimate_W, estimate_W_hat, martingale_lattice,
                                 martingale_path, solve_poisson,
                                 write_exit_triples)
from condwalk.models import load_model

THETA = (Fraction(-88, 45), Fraction(-28, 45), Fraction(-58, 45),
         Fraction(77, 45))
R = (Fraction(-43, 45), Fraction(-73, 45), Fraction(77, 45), Fraction(49, 90))


class TestSolvePoisson:
    def test_finite_exact_solution(self, model4):
        sol = solve_poisson(model4)
        assert sol.theta == THETA
        assert sol.r == R

    def test_residual_is_zero(self, model4, chain4):
        sol = solve_poisson(model4)
        assert all(v == 0 for v in sol.residual(chain4))

    def test_identities_from_first_principles(self, chain4):
        # theta - P theta = f and r = P theta, recomputed with raw dots
        sol = solve_poisson(chain4)
        for i in range(chain4.n_states):
            p_theta = sum(chain4.transition[i][j] * sol.theta[j]
                          for j in range(chain4.n_states))
            assert sol.theta[i] - p_theta == chain4.f_values[i]
            assert sol.r[i] == p_theta

    def test_theta_centered(self, chain4):
        from condwalk.exact import stationary_distribution
        nu = stationary_distribution(chain4)
        sol = solve_poisson(chain4)
        assert sum(n * t for n, t in zip(nu, sol.theta)) == 0

    def test_affine_coefficients(self, affine_model, drift_model):
        sol = solve_poisson(affine_model)
        assert sol.theta_coef == 1.0 and sol.r_coef == 0.0
        sol2 = solve_poisson(drift_model)
        assert sol2.theta_coef == pytest.approx(2.0)
        assert sol2.r_coef == pytest.approx(1.0)

    def test_contraction_required(self):
        model = load_model({"type": "affine1d",
                            "a": {"support": [1.0], "probs": [1.0]},
                            "b": {"uniform": [-1.0, 1.0]},
                            "n_epsilon": 0.1})
        with pytest.raises(SingularBeyondNullspace, match="not < 1"):
            solve_poisson(model)


class TestMartingaleLattice:
    def test_frozen_lattice(self, chain4):
        sol = solve_poisson(chain4)
        lc, k0L, shifts, theta, r = martingale_lattice(chain4, sol,
                                                       Fraction(2))
        assert lc == 90
        assert k0L == 180
        assert shifts == [-90, 90, -270, 105]
        assert theta == [-176, -56, -116, 154]
        assert r == [-86, -146, 154, 49]

    def test_lattice_consistent_with_solution(self, chain4):
        sol = solve_poisson(chain4)
        lc, _, shifts, theta, r = martingale_lattice(chain4, sol, Fraction(3))
        for i in range(chain4.n_states):
            assert Fraction(theta[i], lc) == sol.theta[i]
            assert Fraction(r[i], lc) == sol.r[i]
            assert Fraction(shifts[i], lc) == chain4.f_values[i]


class TestExitTriples:
    def test_times_ordered_and_coupled(self, model4):
        triples = collect_exit_triples(model4, "-3", 3, 512, seed=5,
                                       n_max=100_000)
        assert len(triples) == 512
        for t in triples:
            if t.censored:
                assert t.t_hat is None
                continue
            # this chain never dips the martingale while the walk is
            # alive, so the first dip is the post-exit dip
            assert t.t == t.t_hat
            assert t.tau is not None and t.tau <= t.t
            assert t.m_at_tau is not None

    def test_drift_model_separates_times(self, drift_model):
        triples = collect_exit_triples(drift_model, 0.0, 2.0, 1024, seed=11,
                                       n_max=100_000)
        strict = sum(1 for t in triples
                     if t.t is not None and t.t_hat is not None
                     and t.t < t.t_hat)
        assert strict > 0
        for t in triples:
            if t.t is not None and t.t_hat is not None:
                assert t.t <= t.t_hat
            if t.tau is not None and t.t_hat is not None:
                assert t.tau <= t.t_hat

    def test_single_path_matches_batch(self, model4):
        triples = collect_exit_triples(model4, "-3", 3, 64, seed=5,
                                       n_max=100_000)
        for stream in (0, 17, 63):
            one = martingale_path(model4, "-3", 3, seed=5, stream=stream)
            assert one == triples[stream]

    def test_csv_format(self, model4):
        triples = collect_exit_triples(model4, "-3", 3, 8, seed=5,
                                       n_max=50_000)
        buf = io.StringIO()
        write_exit_triples(triples, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "sample,tau,T,That,M_at_tau,censored"
        assert len(lines) == 9
        for line, t in zip(lines[1:], triples):
            cells = line.split(",")
            assert cells[0] == str(t.sample)
            assert cells[5] == ("1" if t.censored else "0")
            if t.tau is None:
                assert cells[1] == ""


class TestEstimators:
    def test_v_against_exact_dp(self, model4, chain4):
        truth = harmonic_value_dp(chain4, "-3", 2).value
        est = estimate_V_martingale(model4, "-3", 2, 4096, seed=7,
                                    n_max=20_000)
        assert est.method == "MARTINGALE_MC"
        assert abs(est.value - truth) <= est.error_bound
        assert "0 violations" in est.note

    def test_v_reproducible_and_thread_invariant(self, model4):
        a = estimate_V_martingale(model4, "-3", 2, 2048, seed=7,
                                  n_max=20_000, threads=1)
        b = estimate_V_martingale(model4, "-3", 2, 2048, seed=7,
                                  n_max=20_000, threads=4)
        assert a.value == b.value
        assert a.error_bound == b.error_bound

    def test_v_affine_covers_overshoot_band(self, affine_model):
        # E a = 0 makes r = 0, so M_tau = S_tau and
        # V = y + E(overshoot) >= y, with overshoot below one increment
        est = estimate_V_martingale(affine_model, 0.0, 2.0, 8192, seed=7,
                                    n_max=100_000)
        assert est.value >= 2.0 - est.error_bound
        assert est.value <= 3.0 + est.error_bound

    def test_w_equals_w_hat_on_this_chain(self, model4):
        w = estimate_W(model4, "-3", 3, 2048, seed=5, n_max=100_000)
        w_hat = estimate_W_hat(model4, "-3", 3, 2048, seed=5, n_max=100_000)
        assert w.value == w_hat.value

    def test_w_hat_exceeds_w_with_drift(self, drift_model):
        w = estimate_W(drift_model, 0.0, 2.0, 4096, seed=11, n_max=100_000)
        w_hat = estimate_W_hat(drift_model, 0.0, 2.0, 4096, seed=11,
                               n_max=100_000)
        # the post-exit dip time dominates; the gap here is far above
        # the Monte Carlo noise
        assert w_hat.value > w.value + 0.2

    def test_too_many_censored(self, model4):
        with pytest.raises(TooManyCensored, match="censored"):
            estimate_W(model4, "-3", 3, 256, seed=1, n_max=4)

    def test_identity_violation_guard(self):
        tau = np.array([1, 2], dtype=np.int64)
        m = np.array([-1.0, -2.0])
        with pytest.raises(IdentityViolation, match="coupling identity"):
            _estimate(tau, m, 2, 1.0, 1.0, np.array([3, 3]), 1, "X")

    def test_corrupted_r_breaks_coupling(self, chain4):
        # shift r off the Poisson solution by one lattice unit and the
        # in-kernel identity check must start counting violations
        from condwalk._kernels import pyref
        sol = solve_poisson(chain4)
        lc, k0L, shifts, theta, r = martingale_lattice(chain4, sol,
                                                       Fraction(2))
        bad_r = [v + 1 for v in r]
        out = pyref.finite_martingale(7, 0, 64, 0, k0L,
                                      np.array(shifts, np.int64),
                                      np.array(theta, np.int64),
                                      np.array(bad_r, np.int64),
                                      chain4.p_cum, 64, 0)
        assert out[7] > 0

    def test_sample_count_and_se_positive(self, model4):
        est = estimate_V_martingale(model4, "-3", 2, 512, seed=3,
                                    n_max=20_000)
        assert est.converged_at is None
        assert est.error_bound > 0
        assert "512 censored" in est.note
