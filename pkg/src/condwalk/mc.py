"""Monte Carlo estimators for survival, conditional laws and CLT checks.

Sample i always consumes counter stream i, so every estimate is a pure
function of (seed, model, parameters): thread count and slab size never
change a digit. Slab outputs are concatenated in slab order and reduced
with a single NumPy operation to keep float summation deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NoSurvivors
from .exact import StepCDF, as_rational, walk_lattice
from .models import Affine1DSpec, AffineRdSpec, FiniteChainSpec, WalkModel
from .rng import DEFAULT_SEED


@dataclass(frozen=True)
class EstimateWithError:
    """Point estimate with one standard error and the sample size."""

    value: float
    se: float
    n_samples: int


def _spec_of(model):
    return model.spec if isinstance(model, WalkModel) else model


def _spread_args(spec: Affine1DSpec):
    b = spec.b_law
    if hasattr(b, "support"):
        return (1, 0.0, 0.0, np.asarray(b.support, dtype=np.float64), b.cum)
    return (0, b.lo, b.hi, np.zeros(1), np.ones(1))


def _walk_parts(spec, x, y, record_at, n_samples, seed, threads, kill):
    """Run the walk kernel over fixed slabs; returns the per-slab tuples."""
    if isinstance(spec, FiniteChainSpec):
        ix = spec.state_index(x)
        y = as_rational(y, float_mode=True)
        _, k0, shifts = walk_lattice(spec, y)
        p_cum = spec.p_cum

        def run(s0, count):
            return _kernels.finite_walk(seed, s0, count, ix, k0, shifts,
                                        p_cum, record_at, kill)
    elif isinstance(spec, Affine1DSpec):
        b_mode, b_lo, b_hi, b_support, b_cum = _spread_args(spec)
        a_support = np.asarray(spec.a_support, dtype=np.float64)
        a_cum = spec.a_cum
        x0 = float(x)
        y0 = float(y)

        def run(s0, count):
            return _kernels.affine1d_walk(seed, s0, count, x0, y0,
                                          a_support, a_cum, b_mode, b_lo,
                                          b_hi, b_support, b_cum,
                                          record_at, kill)
    elif isinstance(spec, AffineRdSpec):
        x0 = np.asarray(x, dtype=np.float64)
        y0 = float(y)
        a_stack = spec.a_arrays
        b_stack = spec.b_arrays
        cum = spec.cum
        u_vec = spec.u_array

        def run(s0, count):
            return _kernels.affine_rd_walk(seed, s0, count, x0, y0, a_stack,
                                           b_stack, cum, u_vec, record_at,
                                           kill)
    else:
        raise TypeError(f"unsupported model spec {type(spec).__name__}")
    return _kernels.map_slabs(run, n_samples, threads, _kernels.WALK_SLAB)


def _terminal_sums(spec, parts, y):
    """Walk values y + S_n of the paths alive at the last horizon."""
    if isinstance(spec, FiniteChainSpec):
        lattice, _, _ = walk_lattice(spec, as_rational(y, float_mode=True))
        ks = np.concatenate([p[2] for p in parts])
        return ks.astype(np.float64) / lattice
    if isinstance(spec, Affine1DSpec):
        s = np.concatenate([p[2] for p in parts])
        return float(y) + s
    s = np.concatenate([p[1] for p in parts])
    return float(y) + s


def survival_curve_mc(model, x, y, horizons, n_samples: int,
                      seed: int = DEFAULT_SEED,
                      threads: int | None = None) -> list[EstimateWithError]:
    """P_x(tau_y > n) for each horizon, from one shared set of paths."""
    spec = _spec_of(model)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    horizons = sorted(set(int(n) for n in horizons))
    if not horizons or horizons[0] < 0:
        raise ValueError("horizons must be non-negative integers")
    parts = _walk_parts(spec, x, y, horizons, n_samples, seed, threads,
                        kill=True)
    counts = np.sum([p[0] for p in parts], axis=0)
    out = []
    for alive in counts:
        p_hat = float(alive) / n_samples
        se = math.sqrt(p_hat * (1.0 - p_hat) / n_samples)
        out.append(EstimateWithError(p_hat, se, n_samples))
    return out


def estimate_survival(model, x, y, n: int, n_samples: int,
                      seed: int = DEFAULT_SEED,
                      threads: int | None = None) -> EstimateWithError:
    """P_x(tau_y > n) with a binomial standard error."""
    return survival_curve_mc(model, x, y, [n], n_samples, seed, threads)[0]


def conditional_law_mc(model, x, y, n: int, n_samples: int, sigma: float,
                       seed: int = DEFAULT_SEED,
                       threads: int | None = None):
    """Empirical CDF of (y+S_n)/(sigma sqrt(n)) given survival to n.

    Returns (StepCDF, n_survivors). Raises NoSurvivors when every path
    exited before n.
    """
    spec = _spec_of(model)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if n < 1:
        raise ValueError("the conditional law needs a horizon n >= 1")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    parts = _walk_parts(spec, x, y, [n], n_samples, seed, threads, kill=True)
    values = _terminal_sums(spec, parts, y)
    n_surv = values.size
    if n_surv == 0:
        raise NoSurvivors(f"no path of {n_samples} survived to n = {n}")
    t = np.sort(values / (sigma * math.sqrt(n)))
    atoms, counts = np.unique(t, return_counts=True)
    return StepCDF(atoms, counts / n_surv), int(n_surv)


def ks_rayleigh(cdf: StepCDF) -> float:
    """Sup distance between a step CDF and the Rayleigh limit law."""
    return cdf.sup_distance(
        lambda t: 1.0 - math.exp(-0.5 * t * t) if t > 0.0 else 0.0
    )


def berry_esseen_diag(model, x, n: int, n_samples: int, sigma: float,
                      seed: int = DEFAULT_SEED,
                      threads: int | None = None) -> float:
    """Sup distance of the free walk S_n / sqrt(n) from Normal(0, sigma^2).

    No positivity kill is applied (y = 0 is a placeholder start); this
    diagnoses the plain CLT normalization, expected O(1/sqrt(n)).
    """
    spec = _spec_of(model)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    parts = _walk_parts(spec, x, 0, [n], n_samples, seed, threads, kill=False)
    values = np.sort(_terminal_sums(spec, parts, 0) / math.sqrt(n))
    scale = sigma * math.sqrt(2.0)
    ref = np.array([0.5 * (1.0 + math.erf(v / scale)) for v in values])
    grid = np.arange(1, n_samples + 1) / n_samples
    upper = np.max(np.abs(grid - ref))
    lower = np.max(np.abs(grid - 1.0 / n_samples - ref))
    return float(max(upper, lower))


def estimate_variance(model, x, n: int, n_samples: int,
                      seed: int = DEFAULT_SEED,
                      threads: int | None = None) -> EstimateWithError:
    """Var(S_n) / n of the free walk, with a 64-block jackknife error."""
    spec = _spec_of(model)
    if n_samples < 2:
        raise ValueError("variance needs n_samples >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    parts = _walk_parts(spec, x, 0, [n], n_samples, seed, threads, kill=False)
    values = _terminal_sums(spec, parts, 0)
    v_hat = float(np.var(values, ddof=1)) / n
    n_blocks = min(64, n_samples)
    blocks = np.array_split(values, n_blocks)
    leave_out = []
    for b in range(n_blocks):
        rest = np.concatenate([blocks[j] for j in range(n_blocks) if j != b])
        leave_out.append(float(np.var(rest, ddof=1)) / n)
    leave_out = np.array(leave_out)
    se = math.sqrt(
        (n_blocks - 1) / n_blocks * float(((leave_out - leave_out.mean()) ** 2).sum())
    )
    return EstimateWithError(v_hat, se, n_samples)


def affine1d_variance(spec: Affine1DSpec | WalkModel) -> float:
    """Asymptotic variance of the 1-d affine walk, in closed form.

    With theta(x) = x / (1 - E a), sigma^2 = (1 + E a) / (1 - E a) times
    the stationary second moment E x^2 = E b^2 / (1 - E a^2); needs
    E a^2 < 1.
    """
    spec = _spec_of(spec)
    if not isinstance(spec, Affine1DSpec):
        raise TypeError("affine1d_variance needs a 1-d affine model")
    probs = np.asarray(spec.a_probs, dtype=np.float64)
    supp = np.asarray(spec.a_support, dtype=np.float64)
    a_bar = float(probs @ supp)
    a_sq = float(probs @ (supp * supp))
    if a_sq >= 1.0:
        raise ValueError(f"E a^2 = {a_sq} is not < 1; no stationary variance")
    b = spec.b_law
    if hasattr(b, "support"):
        bs = np.asarray(b.support, dtype=np.float64)
        bp = np.asarray(b.probs, dtype=np.float64)
        b_sq = float(bp @ (bs * bs))
    else:
        width = b.hi - b.lo
        mid = 0.5 * (b.hi + b.lo)
        b_sq = width * width / 12.0 + mid * mid
    x_sq = b_sq / (1.0 - a_sq)
    return (1.0 + a_bar) / (1.0 - a_bar) * x_sq
