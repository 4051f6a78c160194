"""Exact engine for finite chains: linear algebra and lattice DP.

Everything here runs on the common-denominator lattice of the walk:
rational increments f and start y share a spacing 1/L, so survival and
exit events are integer comparisons and the fixtures come out bit-exact
in EXACT_RATIONAL mode. FLOAT mode runs the same recursion on dense
float64 frontiers for long horizons.

The harmonic function V(x, y) = lim_n E_x(y+S_n; tau_y > n) is computed
two ways: EXIT_SYSTEM (default) solves the linear system satisfied by
the expected exit payload g(x, y) = E[(y+S_tau) + r(X_tau)], for which
V = y + r(x) - g; its error decays geometrically in the lattice cutoff,
reaching near machine precision in milliseconds. DP_LIMIT follows the
restricted expectations e_n directly with a doubling Cauchy test and a
geometric-decay clamp; its bias after n steps is bounded by C * p_n
(payload at exit is bounded by max|f| + max|r|), which is the honest
error bound it reports.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix, identity
from scipy.sparse.linalg import splu

from . import _kernels
from ._ratlinalg import dot, poisson_exact, stationary_exact
from .errors import (
    CellBudgetExceeded,
    DegenerateVariance,
    DomainError,
    ExtinctAtHorizon,
    NonLatticeInput,
    NotConverged,
    NotIrreducible,
)
from .models import FiniteChainSpec, WalkModel, is_irreducible

EXACT_RATIONAL = "EXACT_RATIONAL"
FLOAT = "FLOAT"

DEFAULT_CELL_BUDGET = 1 << 31
FLOAT_BIN_SPACING = Fraction(1, 10_000)


def _chain_of(chain) -> FiniteChainSpec:
    if isinstance(chain, WalkModel):
        chain = chain.spec
    if not isinstance(chain, FiniteChainSpec):
        raise TypeError(
            "the exact engine needs a finite chain; "
            "use the monte_carlo estimators for affine models"
        )
    return chain


def as_rational(value, float_mode: bool = False) -> Fraction:
    """Parse a start value exactly; floats allowed only with binning.

    In float mode a float input is binned to the 1e-4 grid (documented
    bias O(n * spacing) on the walk); exact mode rejects it.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise NonLatticeInput(f"cannot parse {value!r} as a rational") from exc
    if isinstance(value, float):
        if not float_mode:
            raise NonLatticeInput(
                f"{value!r} is a float; exact lattice DP needs a rational "
                "(pass a string like '5/2' or an integer)"
            )
        if not math.isfinite(value):
            raise NonLatticeInput(f"{value!r} is not finite")
        return Fraction(round(value / float(FLOAT_BIN_SPACING))) * FLOAT_BIN_SPACING
    raise NonLatticeInput(f"unsupported start value type {type(value).__name__}")


def walk_lattice(chain: FiniteChainSpec, y: Fraction) -> tuple[int, int, list[int]]:
    """Common lattice: spacing 1/L with integer start k0 and shifts.

    Returns (L, k0, shifts) with y = k0/L and f_j = shifts[j]/L.
    """
    denoms = [v.denominator for v in chain.f_values] + [y.denominator]
    L = math.lcm(*denoms)
    k0 = int(y * L)
    shifts = [int(v * L) for v in chain.f_values]
    return L, k0, shifts


@dataclass(frozen=True)
class LatticeFrontier:
    """Sub-probability mass over (state, lattice point) after n steps.

    ``step`` is the lattice spacing; a lattice index a carries the walk
    value offset + a * step. Float mode fills ``mass`` (dense, states x
    width); exact mode fills ``mass_exact`` keyed by (state_index, k)
    with k the absolute lattice index (offset 0).
    """

    step: Fraction
    offset: Fraction
    horizon: int
    mass: np.ndarray | None = None
    mass_exact: dict | None = None

    def total_mass(self):
        if self.mass_exact is not None:
            return sum(self.mass_exact.values(), Fraction(0))
        return float(self.mass.sum())

    def atoms(self) -> list[tuple[float, float]]:
        """(walk value, probability mass) pairs with positive mass."""
        if self.mass_exact is not None:
            acc: dict = {}
            for (_, k), v in self.mass_exact.items():
                acc[k] = acc.get(k, Fraction(0)) + v
            return [
                (float(self.offset + k * self.step), float(v))
                for k, v in sorted(acc.items())
                if v > 0
            ]
        col = self.mass.sum(axis=0)
        idx = np.nonzero(col > 0.0)[0]
        return [
            (float(self.offset + int(a) * self.step), float(col[a])) for a in idx
        ]


@dataclass(frozen=True)
class SurvivalCurve:
    """p_n = P_x(tau_y > n), e_n = E_x(y+S_n; tau_y > n), exit mass per step."""

    mode: str
    p: tuple
    e: tuple
    exit_mass: tuple

    @property
    def n_max(self) -> int:
        return len(self.p) - 1

    def write_csv(self, stream) -> None:
        """Rows n,p_n,e_n,exit_mass_n; exact p/q strings or 17 digits."""
        stream.write("n,p_n,e_n,exit_mass_n\n")
        for n in range(len(self.p)):
            if self.mode == EXACT_RATIONAL:
                stream.write(
                    f"{n},{self.p[n]},{self.e[n]},{self.exit_mass[n]}\n"
                )
            else:
                stream.write(
                    f"{n},{self.p[n]:.17g},{self.e[n]:.17g},{self.exit_mass[n]:.17g}\n"
                )


@dataclass(frozen=True)
class HarmonicEstimate:
    """Value of V(x,y) with provenance and an honest error bound.

    method EXIT_SYSTEM: converged_at is the lattice cutoff depth.
    method DP_LIMIT: converged_at is the DP horizon (None if the Cauchy
    test never passed). method MARTINGALE_MC: converged_at is None.
    """

    value: float
    method: str
    error_bound: float
    converged_at: int | None
    note: str = ""


@dataclass(frozen=True)
class PointClassification:
    x: str
    y: Fraction
    verdict: str  # POSITIVE | ZERO_IMMEDIATE | ZERO_EXPONENTIAL | UNKNOWN
    n0: int | None = None
    decay_rate: float | None = None
    extinct_at: int | None = None

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": str(self.y),
            "verdict": self.verdict,
            "n0": self.n0,
            "decay_rate": self.decay_rate,
            "extinct_at": self.extinct_at,
        }


@dataclass(frozen=True)
class DomainClassification:
    gamma: Fraction
    horizon: int
    points: tuple[PointClassification, ...] = field(default_factory=tuple)

    def verdict(self, x, y) -> PointClassification:
        y = as_rational(y, float_mode=True)
        for pt in self.points:
            if pt.x == x and pt.y == y:
                return pt
        raise KeyError((x, y))


def stationary_distribution(chain) -> list[Fraction]:
    """Exact stationary probability vector of an irreducible chain."""
    chain = _chain_of(chain)
    if not is_irreducible(chain):
        raise NotIrreducible("transition graph is not strongly connected")
    nu = stationary_exact([list(row) for row in chain.transition])
    if nu is None:
        raise NotIrreducible("stationary system is singular")
    return nu


def centering_check(chain, nu) -> Fraction:
    """Exact stationary mean of f; downstream asymptotics need 0."""
    chain = _chain_of(chain)
    return dot(list(nu), list(chain.f_values))


def _poisson_theta(chain: FiniteChainSpec, nu) -> list[Fraction]:
    theta = poisson_exact(
        [list(row) for row in chain.transition], list(chain.f_values), list(nu)
    )
    if theta is None:
        raise NotIrreducible("Poisson system is singular")
    return theta


def asymptotic_variance(chain, nu) -> Fraction:
    """sigma^2 = nu(f^2) + 2 nu(f r), exact via the Poisson solution.

    r = P theta sums the whole correlation series Sum nu(f P^n f) in
    closed form, so no cutoff is involved. Raises DegenerateVariance
    when the value is at most 1e-12 (in particular when f has zero sum
    along every cycle).
    """
    chain = _chain_of(chain)
    nu = list(nu)
    mu = dot(nu, list(chain.f_values))
    if mu != 0:
        raise ValueError(f"variance needs a centered walk, stationary mean {mu}")
    theta = _poisson_theta(chain, nu)
    r = [t - f for t, f in zip(theta, chain.f_values)]
    sigma2 = sum(
        (nu_j * f_j * (f_j + 2 * r_j)
         for nu_j, f_j, r_j in zip(nu, chain.f_values, r)),
        Fraction(0),
    )
    if sigma2 <= Fraction(1, 10**12):
        raise DegenerateVariance(f"sigma^2 = {sigma2} is degenerate")
    return sigma2


def variance_series(chain, nu, cutoff: float = 1e-14, cap: int = 100_000) -> float:
    """Float series nu(f^2) + 2 Sum nu(f P^n f), truncated at ``cutoff``.

    Cross-check oracle for asymptotic_variance; the terms decay
    geometrically for chains with a spectral gap.
    """
    chain = _chain_of(chain)
    nu_f = np.array([float(v) for v in nu])
    f = chain.f_float
    p = chain.p_float
    acc = float(nu_f @ (f * f))
    v = f.copy()
    for _ in range(cap):
        v = p @ v
        term = float(nu_f @ (f * v))
        acc += 2.0 * term
        if abs(term) < cutoff:
            break
    return acc


def _require_centered(chain: FiniteChainSpec):
    nu = stationary_distribution(chain)
    mu = centering_check(chain, nu)
    if mu != 0:
        raise ValueError(f"walk is not centered: stationary mean of f is {mu}")
    return nu


def survival_dp(chain, x, y, n_max: int, mode: str = FLOAT,
                cell_budget: int = DEFAULT_CELL_BUDGET):
    """Exact law of survival by forward recursion on (X_k, y+S_k).

    Landing exactly on 0 counts as exit; the start cell is exempt (the
    exit time counts from step 1, so p_0 = 1 even for y <= 0). Returns
    (SurvivalCurve, final LatticeFrontier).
    """
    chain = _chain_of(chain)
    if mode not in (EXACT_RATIONAL, FLOAT):
        raise ValueError(f"unknown mode {mode!r}")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    ix = chain.state_index(x)
    y = as_rational(y, float_mode=(mode == FLOAT))
    L, k0, shifts = walk_lattice(chain, y)
    if mode == EXACT_RATIONAL:
        return _survival_exact(chain, ix, y, L, k0, shifts, n_max, cell_budget)
    return _survival_float(chain, ix, y, L, k0, shifts, n_max, cell_budget)


def _survival_exact(chain, ix, y, L, k0, shifts, n_max, cell_budget):
    mass: dict = {(ix, k0): Fraction(1)}
    p = [Fraction(1)]
    e = [y]
    exits = [Fraction(0)]
    rows = [
        [(i, pji) for i, pji in enumerate(row) if pji > 0]
        for row in chain.transition
    ]
    for _ in range(n_max):
        new: dict = {}
        exit_acc = Fraction(0)
        for (j, k), v in mass.items():
            for i, pji in rows[j]:
                k2 = k + shifts[i]
                if k2 >= 1:
                    cell = (i, k2)
                    new[cell] = new.get(cell, Fraction(0)) + v * pji
                else:
                    exit_acc += v * pji
        mass = new
        if len(mass) > cell_budget:
            raise CellBudgetExceeded(
                f"{len(mass)} occupied cells exceed the budget {cell_budget}"
            )
        p.append(p[-1] - exit_acc)
        exits.append(exit_acc)
        e.append(
            sum((v * Fraction(k, L) for (_, k), v in mass.items()), Fraction(0))
        )
        assert p[-1] == sum(mass.values(), Fraction(0)), "conservation broke"
    curve = SurvivalCurve(EXACT_RATIONAL, tuple(p), tuple(e), tuple(exits))
    frontier = LatticeFrontier(
        step=Fraction(1, L), offset=Fraction(0), horizon=n_max, mass_exact=mass
    )
    return curve, frontier


def _survival_float(chain, ix, y, L, k0, shifts, n_max, cell_budget):
    m = chain.n_states
    smax = max(0, max(shifts))
    k_off = min(0, k0)
    k_hi = max(k0, 1) + n_max * smax
    width = k_hi - k_off + 1
    if m * width > cell_budget:
        raise CellBudgetExceeded(
            f"{m * width} lattice cells exceed the budget {cell_budget}"
        )
    kill_at = 1 - k_off
    mass = np.zeros((m, width))
    out = np.zeros_like(mass)
    mass[ix, k0 - k_off] = 1.0
    kval = (np.arange(width, dtype=np.float64) + k_off) / L
    p = [1.0]
    e = [float(y)]
    exits = [0.0]
    hi = k0 - k_off
    for _ in range(n_max):
        hi = min(width - 1, hi + smax) if smax else hi
        view = slice(0, hi + 1)
        exit_mass = _kernels.dp_step_float(
            mass[:, view], chain.p_float, np.asarray(shifts, dtype=np.int64),
            kill_at, out[:, view],
        )
        mass, out = out, mass
        col = mass[:, view].sum(axis=0)
        p.append(float(col.sum()))
        e.append(float(col @ kval[view]))
        exits.append(float(exit_mass))
    curve = SurvivalCurve(FLOAT, tuple(p), tuple(e), tuple(exits))
    frontier = LatticeFrontier(
        step=Fraction(1, L), offset=Fraction(k_off, L), horizon=n_max, mass=mass
    )
    return curve, frontier


@dataclass(frozen=True)
class StepCDF:
    """Right-continuous step CDF over finitely many atoms."""

    atoms: np.ndarray  # sorted atom positions
    weights: np.ndarray  # positive, sums to 1

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.weights)

    def evaluate(self, t: float) -> float:
        i = int(np.searchsorted(self.atoms, t, side="right"))
        return float(self.cdf[i - 1]) if i else 0.0

    def sup_distance(self, continuous_cdf) -> float:
        """Two-sided sup distance against a continuous CDF callable."""
        ref = np.array([continuous_cdf(t) for t in self.atoms])
        cdf = self.cdf
        upper = np.max(np.abs(cdf - ref))
        lower = np.max(np.abs(np.concatenate(([0.0], cdf[:-1])) - ref))
        return float(max(upper, lower))

    def write_csv(self, stream) -> None:
        stream.write("t,cdf\n")
        for t, c in zip(self.atoms, self.cdf):
            stream.write(f"{t:.17g},{c:.17g}\n")


def conditional_law_dp(chain, x, y, n: int, mode: str = FLOAT) -> StepCDF:
    """Exact CDF of (y+S_n)/(sigma sqrt(n)) given survival to n."""
    chain = _chain_of(chain)
    if n < 1:
        raise ValueError("conditional law needs a horizon n >= 1")
    nu = _require_centered(chain)
    sigma = math.sqrt(float(asymptotic_variance(chain, nu)))
    curve, frontier = survival_dp(chain, x, y, n, mode=mode)
    p_n = curve.p[-1]
    if p_n <= 0:
        raise ExtinctAtHorizon(f"survival probability is 0 at n = {n}")
    scale = sigma * math.sqrt(n)
    pairs = frontier.atoms()
    total = float(p_n)
    atoms = np.array([val / scale for val, _ in pairs])
    weights = np.array([w / total for _, w in pairs])
    return StepCDF(atoms, weights)


def harmonic_value_dp(chain, x, y, tol: float = 1e-8, n_cap: int = 1 << 16,
                      method: str = "EXIT_SYSTEM") -> HarmonicEstimate:
    """V(x,y) = lim_n E_x(y+S_n; tau_y > n) for a centered finite chain.

    EXIT_SYSTEM (default) solves the exit-payload linear system with a
    far-field closure, doubling the lattice cutoff until two successive
    values agree within tol; near machine precision in practice.
    DP_LIMIT follows e_n with a doubling Cauchy test up to n_cap, clamps
    to 0 when survival decays geometrically (flagged HEURISTIC), and
    reports the rigorous bias bound (max|f| + max|r|) * p_n.
    """
    chain = _chain_of(chain)
    nu = _require_centered(chain)
    asymptotic_variance(chain, nu)  # raises DegenerateVariance when flat
    ix = chain.state_index(x)
    y = as_rational(y, float_mode=True)
    if method == "EXIT_SYSTEM":
        return _harmonic_exit_system(chain, nu, ix, y, tol)
    if method == "DP_LIMIT":
        return _harmonic_dp_limit(chain, nu, ix, y, tol, n_cap)
    raise ValueError(f"unknown method {method!r}; use EXIT_SYSTEM or DP_LIMIT")


def _exit_system_value(chain, ix, k0, L, shifts, r_float, k_cut: int):
    """Solve the exit-payload system at cutoff k_cut and evaluate V.

    Unknowns g(j, k) for k in [1, k_cut]: the expected value of
    (y+S)/L + r(X) at the first entry of the sum lattice into k <= 0.
    Mass escaping above the cutoff is assigned the unknown far-field
    constant ginf (the payload forgets its start in the deep interior);
    two solves against the same factorization give g = G0 + ginf * H,
    and ginf closes the system at the probe depth k_cut/2.
    Returns (value, per-state ginf spread).
    """
    m = chain.n_states
    size = m * k_cut
    p = chain.p_float
    k_arr = np.arange(1, k_cut + 1, dtype=np.int64)
    rows_list, cols_list, data_list = [], [], []
    c0 = np.zeros(size)
    ch = np.zeros(size)
    for j in range(m):
        row_idx = (k_arr - 1) * m + j
        for i in range(m):
            pji = p[j, i]
            if pji == 0.0:
                continue
            k2 = k_arr + shifts[i]
            inside = (k2 >= 1) & (k2 <= k_cut)
            below = k2 <= 0
            above = k2 > k_cut
            rows_list.append(row_idx[inside])
            cols_list.append((k2[inside] - 1) * m + i)
            data_list.append(np.full(int(inside.sum()), pji))
            np.add.at(c0, row_idx[below], pji * (k2[below] / L + r_float[i]))
            np.add.at(ch, row_idx[above], pji)
    t_mat = coo_matrix(
        (np.concatenate(data_list),
         (np.concatenate(rows_list), np.concatenate(cols_list))),
        shape=(size, size),
    ).tocsc()
    a_mat = (identity(size, format="csc") - t_mat).tocsc()
    lu = splu(a_mat)
    g0 = lu.solve(c0)
    h = lu.solve(ch)
    k_star = max(1, k_cut // 2)
    probe = (k_star - 1) * m + np.arange(m)
    denom = 1.0 - h[probe]
    if np.any(denom < 1e-9):
        return None, math.inf
    ginf_per_state = g0[probe] / denom
    ginf = float(ginf_per_state.mean())
    spread = float(ginf_per_state.max() - ginf_per_state.min())

    def g_at(i: int, k: int) -> float:
        return float(g0[(k - 1) * m + i] + ginf * h[(k - 1) * m + i])

    y_float = k0 / L
    if k0 >= 1:
        if k0 > k_cut:
            return None, math.inf
        value = y_float + r_float[ix] - g_at(ix, k0)
    else:
        # start cell is exempt from the kill test: unroll the first step
        g_start = 0.0
        for i in range(m):
            pji = p[ix, i]
            if pji == 0.0:
                continue
            k2 = k0 + shifts[i]
            if k2 <= 0:
                g_start += pji * (k2 / L + r_float[i])
            else:
                g_start += pji * g_at(i, k2)
        value = y_float + r_float[ix] - g_start
    return value, spread


def _harmonic_exit_system(chain, nu, ix, y, tol) -> HarmonicEstimate:
    L, k0, shifts = walk_lattice(chain, y)
    theta = _poisson_theta(chain, nu)
    r_float = np.array(
        [float(t - f) for t, f in zip(theta, chain.f_values)]
    )
    k_cut = 256
    while k_cut < 4 * max(k0, 1) or k_cut < 8 * max(
        (abs(s) for s in shifts), default=1
    ):
        k_cut *= 2
    prev = None
    prev_cut = k_cut
    for _ in range(16):
        value, spread = _exit_system_value(chain, ix, k0, L, shifts, r_float, k_cut)
        if value is not None and prev is not None:
            gap = abs(value - prev)
            if gap <= max(tol / 4, 1e-14 * (1.0 + abs(value))):
                err = gap + spread + 1e-13 * (1.0 + abs(value))
                if value < -max(1e-9, 10 * err):
                    raise ArithmeticError(
                        f"exit-payload solve returned V = {value} < 0"
                    )
                return HarmonicEstimate(
                    value=float(max(value, 0.0)),
                    method="EXIT_SYSTEM",
                    error_bound=float(err),
                    converged_at=k_cut,
                )
        prev, prev_cut = value, k_cut
        k_cut *= 2
        if chain.n_states * k_cut > 1 << 24:
            break
    warnings.warn(
        f"exit-payload solve did not stabilize by cutoff {prev_cut}",
        NotConverged,
    )
    return HarmonicEstimate(
        value=max(prev or 0.0, 0.0),
        method="EXIT_SYSTEM",
        error_bound=math.inf,
        converged_at=None,
        note="cutoff cap reached before the doubling test passed",
    )


def _harmonic_dp_limit(chain, nu, ix, y, tol, n_cap) -> HarmonicEstimate:
    theta = _poisson_theta(chain, nu)
    r_abs = max(abs(float(t - f)) for t, f in zip(theta, chain.f_values))
    payload_bound = float(max(abs(v) for v in chain.f_float)) + r_abs
    L, k0, shifts = walk_lattice(chain, y)
    m = chain.n_states
    smax = max(0, max(shifts))
    k_off = min(0, k0)
    width = max(k0, 1) + n_cap * smax - k_off + 1
    if m * width > DEFAULT_CELL_BUDGET:
        raise CellBudgetExceeded(
            f"{m * width} cells needed for n_cap={n_cap} exceed the budget"
        )
    kill_at = 1 - k_off
    mass = np.zeros((m, width))
    out = np.zeros_like(mass)
    mass[ix, k0 - k_off] = 1.0
    kval = (np.arange(width, dtype=np.float64) + k_off) / L
    shifts_arr = np.asarray(shifts, dtype=np.int64)
    hi = k0 - k_off
    e_prev_checkpoint = float(y)
    checkpoint = 1
    log_p: list[tuple[int, float]] = []
    n = 0
    while n < n_cap:
        n += 1
        hi = min(width - 1, hi + smax) if smax else hi
        view = slice(0, hi + 1)
        _kernels.dp_step_float(
            mass[:, view], chain.p_float, shifts_arr, kill_at, out[:, view]
        )
        mass, out = out, mass
        col = mass[:, view].sum(axis=0)
        p_n = float(col.sum())
        if p_n == 0.0:
            return HarmonicEstimate(
                value=0.0, method="DP_LIMIT", error_bound=0.0, converged_at=n,
                note=f"walk extinct at n = {n}",
            )
        if p_n > 0.0:
            log_p.append((n, math.log(p_n)))
        if n == checkpoint:
            e_n = float(col @ kval[view])
            gap = abs(e_n - e_prev_checkpoint)
            bias = payload_bound * p_n
            if n > 1 and gap < tol:
                return HarmonicEstimate(
                    value=e_n, method="DP_LIMIT",
                    error_bound=gap + bias, converged_at=n,
                )
            clamp = _geometric_clamp(log_p, n)
            if clamp is not None:
                return HarmonicEstimate(
                    value=0.0, method="DP_LIMIT", error_bound=bias,
                    converged_at=n,
                    note=f"HEURISTIC geometric decay, rate {clamp:.6g} per step",
                )
            e_prev_checkpoint = e_n
            checkpoint *= 2
    e_n = float(mass.sum(axis=0) @ kval)
    p_n = float(mass.sum())
    warnings.warn(
        f"Cauchy test did not pass by n_cap = {n_cap}", NotConverged
    )
    return HarmonicEstimate(
        value=e_n, method="DP_LIMIT",
        error_bound=abs(e_n - e_prev_checkpoint) + payload_bound * p_n,
        converged_at=None,
        note=f"horizon cap {n_cap} reached",
    )


def _geometric_clamp(log_p: list[tuple[int, float]], n: int) -> float | None:
    """Detect geometric decay of p_n: log-linear fit over the recent window.

    Requires R^2 > 0.999 and a per-step slope too steep to be a power
    law (|slope| > 10/n), which a 1/sqrt(n) tail cannot produce; returns
    the decay rate per step, or None.
    """
    window = [(k, lp) for k, lp in log_p if k >= n // 2]
    if len(window) < 8:
        return None
    ks = np.array([k for k, _ in window], dtype=np.float64)
    ys = np.array([lp for _, lp in window])
    slope, intercept = np.polyfit(ks, ys, 1)
    fitted = slope * ks + intercept
    ss_res = float(((ys - fitted) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    if ss_tot <= 0:
        return None
    r2 = 1.0 - ss_res / ss_tot
    if r2 > 0.999 and slope <= -max(10.0 / n, 1e-6):
        return float(-slope)
    return None


def classify_domain(chain, points, gamma, horizon: int,
                    cell_budget: int = 1 << 20) -> DomainClassification:
    """Classify start points against the reachability domain at level gamma.

    POSITIVE: breadth-first search over alive (state, lattice sum) cells
    finds y+S_{n0} > gamma within the horizon (finite chains have control
    function N = 0). ZERO_IMMEDIATE: no alive cell after one step.
    ZERO_EXPONENTIAL: the reachable alive closure is finite with no
    witness, so survival decays geometrically at rate -log(spectral
    radius) of the closure's substochastic matrix; radius 0 means the
    walk goes extinct at a recorded finite step. UNKNOWN: the closure
    was still growing when the horizon was hit.
    """
    chain = _chain_of(chain)
    gamma = as_rational(gamma, float_mode=True)
    if gamma <= 0:
        raise DomainError(f"gamma must be > 0, got {gamma}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    results = []
    for x, y in points:
        y = as_rational(y, float_mode=True)
        results.append(_classify_point(chain, x, y, gamma, horizon, cell_budget))
    return DomainClassification(gamma, horizon, tuple(results))


def _classify_point(chain, x, y, gamma, horizon, cell_budget) -> PointClassification:
    ix = chain.state_index(x)
    label = chain.labels[ix]
    L, k0, shifts = walk_lattice(chain, y)
    gamma_k = gamma * L  # witness: k > gamma_k exactly
    rows = [
        [i for i, pji in enumerate(row) if pji > 0] for row in chain.transition
    ]
    frontier = {(ix, k0)}
    visited: set = set()
    for n0 in range(1, horizon + 1):
        targets = set()
        for (j, k) in frontier:
            for i in rows[j]:
                k2 = k + shifts[i]
                if k2 >= 1:
                    targets.add((i, k2))
        for (i, k2) in targets:
            if Fraction(k2) > gamma_k:
                return PointClassification(label, y, "POSITIVE", n0=n0)
        if n0 == 1 and not targets:
            return PointClassification(label, y, "ZERO_IMMEDIATE")
        new = targets - visited
        visited |= targets
        if len(visited) > cell_budget:
            raise CellBudgetExceeded(
                f"domain search exceeded {cell_budget} cells at ({label}, {y})"
            )
        if not new:
            return _closure_verdict(chain, label, y, rows, shifts, visited,
                                    (ix, k0))
        frontier = new
    return PointClassification(label, y, "UNKNOWN")


def _closure_verdict(chain, label, y, rows, shifts, closure: set,
                     start) -> PointClassification:
    """Saturated alive closure, no witness: exact geometric-decay verdict."""
    cells = sorted(closure)
    pos = {cell: a for a, cell in enumerate(cells)}
    q = np.zeros((len(cells), len(cells)))
    p = chain.p_float
    for (j, k), a in pos.items():
        for i in rows[j]:
            k2 = k + shifts[i]
            if k2 >= 1:
                q[a, pos[(i, k2)]] += p[j, i]
    radius = float(np.max(np.abs(np.linalg.eigvals(q)))) if cells else 0.0
    if radius > 1e-12:
        return PointClassification(
            label, y, "ZERO_EXPONENTIAL", decay_rate=float(-math.log(radius))
        )
    # nilpotent closure: propagate alive sets until extinction
    alive = {start}
    n = 0
    while alive:
        n += 1
        alive = {
            (i, k + shifts[i])
            for (j, k) in alive
            for i in rows[j]
            if k + shifts[i] >= 1
        }
        if n > len(cells) + 2:
            raise AssertionError("nilpotent closure failed to go extinct")
    return PointClassification(
        label, y, "ZERO_EXPONENTIAL", decay_rate=None, extinct_at=n
    )
