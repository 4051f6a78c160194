"""Poisson equation and the coupled exit-time martingale.

Solving theta - P theta = f (with nu(theta) = 0) yields r = P theta and
the martingale M_n = sum_k [theta(X_k) - r(X_{k-1})], which couples to
the walk through the exact identity z + M_n = y + S_n + r(X_n) where
z = y + r(x). The walk's exit time tau (first y+S <= 0), the
martingale's exit time T (first z+M <= 0) and the combined time T_hat
(first z+M <= 0 at a step >= tau, same step allowed) give Monte Carlo
estimators for the harmonic function V(x,y) = -E(M_tau) and its
martingale analogues W(x,z) = -E(M_T), W_hat = -E(M_T_hat).

Finite chains run the whole recursion in int64 on the common lattice of
f, theta, r and y, so the coupling identity is checked exactly at every
step; the 1-d affine recursion checks it in floats at 1e-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from ._ratlinalg import poisson_exact
from .errors import (
    IdentityViolation,
    SingularBeyondNullspace,
    TooManyCensored,
)
from .exact import HarmonicEstimate, as_rational, stationary_distribution
from .models import Affine1DSpec, AffineRdSpec, FiniteChainSpec, WalkModel
from .rng import DEFAULT_SEED

STOP_AT_TAU = 0
STOP_AT_T = 1
STOP_AT_T_HAT = 2

CENSORING_LIMIT = 0.10


@dataclass(frozen=True)
class PoissonSolution:
    """Exact solution of theta - P theta = f on a finite chain."""

    theta: tuple[Fraction, ...]
    r: tuple[Fraction, ...]

    @property
    def theta_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.theta])

    @property
    def r_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.r])

    def residual(self, chain: FiniteChainSpec) -> tuple[Fraction, ...]:
        """theta - P theta - f per state; all zero for a valid solution."""
        out = []
        for j, row in enumerate(chain.transition):
            ptheta = sum((p * t for p, t in zip(row, self.theta)), Fraction(0))
            out.append(self.theta[j] - ptheta - chain.f_values[j])
        return tuple(out)


@dataclass(frozen=True)
class AffinePoissonSolution:
    """Closed-form linear solution for affine recursions.

    1-d: theta(x) = x / (1 - E a), r(x) = theta(x) - x.
    R^d with f(x) = <u, x>: theta(x) = <w, x> for w = (I - E A^T)^{-1} u,
    r(x) = <w - u, x>.
    """

    theta_coef: np.ndarray  # shape () for 1-d, (d,) for R^d
    r_coef: np.ndarray

    def theta(self, x) -> float:
        return float(np.dot(self.theta_coef, x))

    def r(self, x) -> float:
        return float(np.dot(self.r_coef, x))


def solve_poisson(model):
    """Solve the Poisson equation for a loaded model, exactly when finite.

    Raises SingularBeyondNullspace when the mean-zero system is singular
    (finite) or the mean contraction fails |E a| < 1 / rho(E A) < 1
    (affine), in which case no linear theta exists.
    """
    spec = model.spec if isinstance(model, WalkModel) else model
    if isinstance(spec, FiniteChainSpec):
        nu = stationary_distribution(spec)
        theta = poisson_exact(
            [list(row) for row in spec.transition], list(spec.f_values), list(nu)
        )
        if theta is None:
            raise SingularBeyondNullspace(
                "Poisson system is singular beyond the constant nullspace"
            )
        sol = PoissonSolution(
            theta=tuple(theta),
            r=tuple(t - f for t, f in zip(theta, spec.f_values)),
        )
        res = sol.residual(spec)
        assert all(v == 0 for v in res), f"Poisson residual nonzero: {res}"
        return sol
    if isinstance(spec, Affine1DSpec):
        a_bar = float(np.dot(spec.a_support, spec.a_probs))
        if abs(a_bar) >= 1.0 - 1e-12:
            raise SingularBeyondNullspace(
                f"|E a| = {abs(a_bar)} is not < 1; no linear theta exists"
            )
        tc = 1.0 / (1.0 - a_bar)
        return AffinePoissonSolution(
            theta_coef=np.float64(tc), r_coef=np.float64(tc - 1.0)
        )
    if isinstance(spec, AffineRdSpec):
        a_mean = spec.a_mean
        rho = float(np.max(np.abs(np.linalg.eigvals(a_mean))))
        if rho >= 1.0 - 1e-12:
            raise SingularBeyondNullspace(
                f"rho(E A) = {rho} is not < 1; no linear theta exists"
            )
        w = np.linalg.solve(np.eye(spec.d) - a_mean.T, spec.u_array)
        return AffinePoissonSolution(theta_coef=w, r_coef=w - spec.u_array)
    raise TypeError(f"unsupported model spec {type(spec).__name__}")


@dataclass(frozen=True)
class ExitTriple:
    """Stopping data for one path; None marks a time censored at n_max."""

    sample: int
    tau: int | None
    t: int | None
    t_hat: int | None
    m_at_tau: float | None
    censored: bool


def write_exit_triples(triples, stream) -> None:
    stream.write("sample,tau,T,That,M_at_tau,censored\n")
    for tr in triples:
        cells = [
            str(tr.sample),
            "" if tr.tau is None else str(tr.tau),
            "" if tr.t is None else str(tr.t),
            "" if tr.t_hat is None else str(tr.t_hat),
            "" if tr.m_at_tau is None else f"{tr.m_at_tau:.17g}",
            "1" if tr.censored else "0",
        ]
        stream.write(",".join(cells) + "\n")


def martingale_lattice(chain: FiniteChainSpec, sol: PoissonSolution,
                       y: Fraction):
    """Common int64 lattice of f, theta, r and y (units of 1/LC)."""
    denoms = [v.denominator for v in chain.f_values]
    denoms += [v.denominator for v in sol.theta]
    denoms += [v.denominator for v in sol.r]
    denoms.append(y.denominator)
    lc = math.lcm(*denoms)
    shifts = [int(v * lc) for v in chain.f_values]
    theta = [int(v * lc) for v in sol.theta]
    r = [int(v * lc) for v in sol.r]
    return lc, int(y * lc), shifts, theta, r


def _spread_args(spec: Affine1DSpec):
    b = spec.b_law
    if hasattr(b, "support"):
        return (1, 0.0, 0.0, np.asarray(b.support, dtype=np.float64), b.cum)
    return (0, b.lo, b.hi, np.zeros(1), np.ones(1))


def _run_finite(chain, lattice, ix, n_samples, seed, n_max, stop_rule,
                threads):
    lc, k0L, shiftsL, thetaL, rL = lattice
    kernel = _kernels.finite_martingale
    p_cum = chain.p_cum

    def run(s0, count):
        return kernel(seed, s0, count, ix, k0L, shiftsL, thetaL, rL,
                      p_cum, n_max, stop_rule)

    parts = _kernels.map_slabs(run, n_samples, threads,
                               _kernels.MARTINGALE_SLAB)
    tau = np.concatenate([p[0] for p in parts])
    t = np.concatenate([p[1] for p in parts])
    t_hat = np.concatenate([p[2] for p in parts])
    m = [np.concatenate([p[3 + j] for p in parts]) / lc for j in range(3)]
    checks = int(np.sum([p[6].sum() for p in parts]))
    viol = int(np.sum([p[7] for p in parts]))
    return tau, t, t_hat, m[0], m[1], m[2], checks, viol


def _run_affine1d(spec, sol, x, y, n_samples, seed, n_max, stop_rule, threads):
    b_mode, b_lo, b_hi, b_support, b_cum = _spread_args(spec)
    a_support = np.asarray(spec.a_support, dtype=np.float64)
    a_cum = spec.a_cum
    tc = float(sol.theta_coef)
    rc = float(sol.r_coef)
    kernel = _kernels.affine1d_martingale

    def run(s0, count):
        return kernel(seed, s0, count, x, y, a_support, a_cum,
                      b_mode, b_lo, b_hi, b_support, b_cum,
                      tc, rc, n_max, stop_rule)

    parts = _kernels.map_slabs(run, n_samples, threads,
                               _kernels.MARTINGALE_SLAB)
    tau = np.concatenate([p[0] for p in parts])
    t = np.concatenate([p[1] for p in parts])
    t_hat = np.concatenate([p[2] for p in parts])
    m = [np.concatenate([p[3 + j] for p in parts]) for j in range(3)]
    checks = int(np.sum([p[6].sum() for p in parts]))
    viol = int(np.sum([p[7] for p in parts]))
    return tau, t, t_hat, m[0], m[1], m[2], checks, viol


def _estimate(times, m_values, n_samples, z_abs, payload_bound, checks, viol,
              method) -> HarmonicEstimate:
    """Turn stopped-martingale samples into -E(M) with an honest bound.

    Censored paths contribute 0 (optional stopping makes the zero-fill
    estimator's bias exactly -E[M; not stopped by n_max], bounded by
    (payload + |z|) times the censoring probability).
    """
    if viol:
        raise IdentityViolation(
            f"coupling identity z+M = y+S+r(X) failed on {viol} of "
            f"{checks} checks"
        )
    censored = int(np.count_nonzero(times < 0))
    eps = censored / n_samples
    if eps > CENSORING_LIMIT:
        raise TooManyCensored(
            f"{censored} of {n_samples} paths censored "
            f"({100 * eps:.1f}% > {100 * CENSORING_LIMIT:.0f}%); raise n_max"
        )
    value = -float(np.sum(m_values)) / n_samples
    sd = float(np.std(m_values, ddof=1)) if n_samples > 1 else 0.0
    se = sd / math.sqrt(n_samples)
    eps_ub = eps + 3.0 * math.sqrt(max(eps * (1 - eps), 0.0) / n_samples) \
        + 3.0 / n_samples
    bias = (payload_bound + z_abs) * eps_ub
    return HarmonicEstimate(
        value=value,
        method=method,
        error_bound=3.0 * se + bias,
        converged_at=None,
        note=f"{checks} identity checks, 0 violations; "
             f"{censored} of {n_samples} censored",
    )


def _finite_bounds(chain, sol):
    f_abs = float(max(abs(v) for v in chain.f_values))
    r_abs = float(max(abs(v) for v in sol.r))
    theta_abs = float(max(abs(v) for v in sol.theta))
    exit_payload = f_abs + r_abs       # |z + M_tau| = |y+S_tau + r| bound
    jump = theta_abs + r_abs           # one-step |M_k - M_{k-1}| bound
    return exit_payload, jump


def estimate_V_martingale(model, x, y, n_samples: int, seed: int = DEFAULT_SEED,
                          n_max: int = 1_000_000,
                          threads: int | None = None) -> HarmonicEstimate:
    """V(x, y) = -E(M_tau) by stopped-martingale Monte Carlo.

    Sample i uses counter stream i, so the result depends only on
    (seed, n_samples, n_max), not on threads or slab partitioning.
    """
    spec = model.spec if isinstance(model, WalkModel) else model
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sol = solve_poisson(spec)
    if isinstance(spec, FiniteChainSpec):
        ix = spec.state_index(x)
        y = as_rational(y, float_mode=True)
        lattice = martingale_lattice(spec, sol, y)
        tau, _, _, m_tau, _, _, checks, viol = _run_finite(
            spec, lattice, ix, n_samples, seed, n_max, STOP_AT_TAU, threads,
        )
        z_abs = abs((lattice[1] + lattice[4][ix]) / lattice[0])
        exit_payload, _ = _finite_bounds(spec, sol)
        return _estimate(tau, m_tau, n_samples, z_abs, exit_payload,
                         checks, viol, "MARTINGALE_MC")
    if isinstance(spec, Affine1DSpec):
        x = float(x)
        y = float(y)
        tau, _, _, m_tau, _, _, checks, viol = _run_affine1d(
            spec, sol, x, y, n_samples, seed, n_max, STOP_AT_TAU, threads,
        )
        z_abs = abs(y + float(sol.r_coef) * x)
        # |y+S_tau| is bounded by the last increment |X_tau|; use the
        # empirical overshoot scale plus r on the same scale
        overshoot = float(np.quantile(np.abs(m_tau), 0.999)) + 1.0
        return _estimate(tau, m_tau, n_samples, z_abs, overshoot,
                         checks, viol, "MARTINGALE_MC")
    raise TypeError(
        "martingale Monte Carlo supports finite chains and 1-d affine models"
    )


def estimate_W(model, x, z, n_samples: int, seed: int = DEFAULT_SEED,
               n_max: int = 1_000_000,
               threads: int | None = None) -> HarmonicEstimate:
    """W(x, z) = -E(M_T) for T the first time z + M <= 0.

    z is the martingale start; the walk start is derived as
    y = z - r(x) so both recursions share one lattice.
    """
    spec = model.spec if isinstance(model, WalkModel) else model
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sol = solve_poisson(spec)
    if isinstance(spec, FiniteChainSpec):
        ix = spec.state_index(x)
        z = as_rational(z, float_mode=True)
        y = z - sol.r[ix]
        lattice = martingale_lattice(spec, sol, y)
        _, t, _, _, m_t, _, checks, viol = _run_finite(
            spec, lattice, ix, n_samples, seed, n_max, STOP_AT_T, threads,
        )
        _, jump = _finite_bounds(spec, sol)
        return _estimate(t, m_t, n_samples, abs(float(z)), jump,
                         checks, viol, "MARTINGALE_MC_W")
    if isinstance(spec, Affine1DSpec):
        x = float(x)
        z = float(z)
        rc = float(sol.r_coef)
        y = z - rc * x
        _, t, _, _, m_t, _, checks, viol = _run_affine1d(
            spec, sol, x, y, n_samples, seed, n_max, STOP_AT_T, threads,
        )
        overshoot = float(np.quantile(np.abs(m_t), 0.999)) + 1.0
        return _estimate(t, m_t, n_samples, abs(z), overshoot,
                         checks, viol, "MARTINGALE_MC_W")
    raise TypeError(
        "martingale Monte Carlo supports finite chains and 1-d affine models"
    )


def estimate_W_hat(model, x, z, n_samples: int, seed: int = DEFAULT_SEED,
                   n_max: int = 1_000_000,
                   threads: int | None = None) -> HarmonicEstimate:
    """W_hat(x, z) = -E(M_T_hat), stopping at the first z+M <= 0 with
    the walk already exited (the same step counts)."""
    spec = model.spec if isinstance(model, WalkModel) else model
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sol = solve_poisson(spec)
    if isinstance(spec, FiniteChainSpec):
        ix = spec.state_index(x)
        z = as_rational(z, float_mode=True)
        y = z - sol.r[ix]
        lattice = martingale_lattice(spec, sol, y)
        _, _, t_hat, _, _, m_t_hat, checks, viol = _run_finite(
            spec, lattice, ix, n_samples, seed, n_max, STOP_AT_T_HAT, threads,
        )
        exit_payload, jump = _finite_bounds(spec, sol)
        return _estimate(t_hat, m_t_hat, n_samples, abs(float(z)),
                         exit_payload + jump, checks, viol,
                         "MARTINGALE_MC_WHAT")
    if isinstance(spec, Affine1DSpec):
        x = float(x)
        z = float(z)
        rc = float(sol.r_coef)
        y = z - rc * x
        _, _, t_hat, _, _, m_t_hat, checks, viol = _run_affine1d(
            spec, sol, x, y, n_samples, seed, n_max, STOP_AT_T_HAT, threads,
        )
        overshoot = float(np.quantile(np.abs(m_t_hat), 0.999)) + 1.0
        return _estimate(t_hat, m_t_hat, n_samples, abs(z), overshoot,
                         checks, viol, "MARTINGALE_MC_WHAT")
    raise TypeError(
        "martingale Monte Carlo supports finite chains and 1-d affine models"
    )


def collect_exit_triples(model, x, y, n_samples: int,
                         seed: int = DEFAULT_SEED, n_max: int = 100_000,
                         threads: int | None = None) -> list[ExitTriple]:
    """Per-path (tau, T, T_hat, M_tau) records; None marks censoring.

    Paths retire at T_hat, which is found last (T_hat >= tau and the
    first dip T precedes or equals it), so all three times are tracked.
    """
    spec = model.spec if isinstance(model, WalkModel) else model
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sol = solve_poisson(spec)
    if isinstance(spec, FiniteChainSpec):
        ix = spec.state_index(x)
        y = as_rational(y, float_mode=True)
        lattice = martingale_lattice(spec, sol, y)
        tau, t, t_hat, m_tau, _, _, checks, viol = _run_finite(
            spec, lattice, ix, n_samples, seed, n_max, STOP_AT_T_HAT, threads,
        )
    elif isinstance(spec, Affine1DSpec):
        tau, t, t_hat, m_tau, _, _, checks, viol = _run_affine1d(
            spec, sol, float(x), float(y), n_samples, seed, n_max,
            STOP_AT_T_HAT, threads,
        )
    else:
        raise TypeError(
            "exit triples support finite chains and 1-d affine models"
        )
    if viol:
        raise IdentityViolation(
            f"coupling identity failed on {viol} of {checks} checks"
        )
    triples = []
    for i in range(n_samples):
        cens = t_hat[i] < 0
        triples.append(ExitTriple(
            sample=i,
            tau=None if tau[i] < 0 else int(tau[i]),
            t=None if t[i] < 0 else int(t[i]),
            t_hat=None if cens else int(t_hat[i]),
            m_at_tau=None if tau[i] < 0 else float(m_tau[i]),
            censored=bool(cens),
        ))
    return triples


def martingale_path(model, x, y, seed: int = DEFAULT_SEED, stream: int = 0,
                    n_max: int = 100_000) -> ExitTriple:
    """One path's exit triple; reproduces batch sample ``stream`` exactly."""
    spec = model.spec if isinstance(model, WalkModel) else model
    sol = solve_poisson(spec)
    if isinstance(spec, FiniteChainSpec):
        ix = spec.state_index(x)
        y = as_rational(y, float_mode=True)
        lc, k0L, shiftsL, thetaL, rL = martingale_lattice(spec, sol, y)
        tau, t, t_hat, m_tau, _, _, checks, viol = _kernels.finite_martingale(
            seed, stream, 1, ix, k0L, shiftsL, thetaL, rL,
            spec.p_cum, n_max, STOP_AT_T_HAT,
        )
        m_val = float(m_tau[0]) / lc
    elif isinstance(spec, Affine1DSpec):
        b_mode, b_lo, b_hi, b_support, b_cum = _spread_args(spec)
        tau, t, t_hat, m_tau, _, _, checks, viol = (
            _kernels.affine1d_martingale(
                seed, stream, 1, float(x), float(y),
                np.asarray(spec.a_support, dtype=np.float64), spec.a_cum,
                b_mode, b_lo, b_hi, b_support, b_cum,
                float(sol.theta_coef), float(sol.r_coef), n_max,
                STOP_AT_T_HAT,
            )
        )
        m_val = float(m_tau[0])
    else:
        raise TypeError(
            "martingale paths support finite chains and 1-d affine models"
        )
    if viol:
        raise IdentityViolation(
            f"coupling identity failed on {viol} of {int(checks[0])} checks"
        )
    cens = t_hat[0] < 0
    return ExitTriple(
        sample=stream,
        tau=None if tau[0] < 0 else int(tau[0]),
        t=None if t[0] < 0 else int(t[0]),
        t_hat=None if cens else int(t_hat[0]),
        m_at_tau=None if tau[0] < 0 else m_val,
        censored=bool(cens),
    )
