"""Model families: finite chains, 1-D and d-dim affine recursions.

A model couples a Markov chain (X_n) with the additive function f driving
the walk S_n = f(X_1) + ... + f(X_n) and a control function N used by the
domain classification. Finite-chain data is exact rational so downstream
dynamic programming is bit-exact; affine models are float-valued.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from ._ratlinalg import dot, stationary_exact
from .errors import DimensionError, SchemaError, StochasticityError
from .rng import DEFAULT_SEED, SeededGenerator, step_uniforms

PASS = "PASS"
FAIL = "FAIL"
UNDECIDED = "UNDECIDED"


def _as_fraction(value, where: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise SchemaError(f"{where}: expected integer or rational string, got {value!r}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(f"{where}: cannot parse {value!r} as a rational") from exc


@dataclass(frozen=True)
class FiniteChainSpec:
    """Finite state space, exact rational transition matrix and f values."""

    labels: tuple[str, ...]
    f_values: tuple[Fraction, ...]
    transition: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        m = len(self.labels)
        if m == 0:
            raise DimensionError("chain needs at least one state")
        if len(set(self.labels)) != m:
            raise SchemaError("state labels must be distinct")
        if len(self.f_values) != m or len(self.transition) != m:
            raise DimensionError(
                f"dimension mismatch: {m} labels, {len(self.f_values)} f values, "
                f"{len(self.transition)} matrix rows"
            )
        for i, row in enumerate(self.transition):
            if len(row) != m:
                raise DimensionError(f"row {i} has {len(row)} entries, expected {m}")
            if any(v < 0 for v in row):
                raise StochasticityError(f"row {i} has a negative entry")
            total = sum(row, Fraction(0))
            if total != 1:
                raise StochasticityError(f"row {i} sums to {total}, expected 1")

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @cached_property
    def index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.labels)}

    @cached_property
    def p_float(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.transition])

    @cached_property
    def p_cum(self) -> np.ndarray:
        """Row-wise cumulative transition probabilities for inverse-CDF draws."""
        return np.cumsum(self.p_float, axis=1)

    @cached_property
    def f_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.f_values])

    @cached_property
    def is_iid(self) -> bool:
        """All rows equal: the chain is an i.i.d. sequence."""
        return all(row == self.transition[0] for row in self.transition)

    def state_index(self, state) -> int:
        """Resolve a state given as label string or integer index."""
        if isinstance(state, str):
            try:
                return self.index[state]
            except KeyError:
                raise SchemaError(f"unknown state label {state!r}") from None
        i = int(state)
        if not 0 <= i < self.n_states:
            raise SchemaError(f"state index {i} out of range [0, {self.n_states})")
        return i


@dataclass(frozen=True)
class UniformLaw:
    lo: float
    hi: float

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def sample(self, u: float) -> float:
        return self.lo + (self.hi - self.lo) * u


@dataclass(frozen=True)
class DiscreteLaw:
    support: tuple[float, ...]
    probs: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    @cached_property
    def cum(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.probs, dtype=np.float64))

    def sample(self, u: float) -> float:
        return self.support[pick_index(self.cum, u)]


@dataclass(frozen=True)
class Affine1DSpec:
    """X_{n+1} = a_{n+1} X_n + b_{n+1}; f(x) = x, N(x) = |x|^(1+epsilon)."""

    a_support: tuple[float, ...]
    a_probs: tuple[float, ...]
    b_law: UniformLaw | DiscreteLaw
    n_epsilon: float = 0.1

    def __post_init__(self):
        if len(self.a_support) != len(self.a_probs) or not self.a_support:
            raise DimensionError("a support and probs must be nonempty, same length")
        if any(p < 0 for p in self.a_probs):
            raise StochasticityError("a probabilities must be nonnegative")
        if abs(sum(self.a_probs) - 1.0) > 1e-12:
            raise StochasticityError(f"a probabilities sum to {sum(self.a_probs)!r}")
        if isinstance(self.b_law, DiscreteLaw):
            if len(self.b_law.support) != len(self.b_law.probs) or not self.b_law.support:
                raise DimensionError("b support and probs must be nonempty, same length")
            if any(p < 0 for p in self.b_law.probs):
                raise StochasticityError("b probabilities must be nonnegative")
            if abs(sum(self.b_law.probs) - 1.0) > 1e-12:
                raise StochasticityError(f"b probabilities sum to {sum(self.b_law.probs)!r}")
        elif self.b_law.hi < self.b_law.lo:
            raise SchemaError("b uniform law needs lo <= hi")
        if abs(self.b_law.mean) > 1e-12:
            raise SchemaError(f"b law must be centered, mean = {self.b_law.mean!r}")
        if not self.n_epsilon > 0:
            raise SchemaError("n_epsilon must be > 0")

    @cached_property
    def a_cum(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.a_probs, dtype=np.float64))


@dataclass(frozen=True)
class AffineRdSpec:
    """X_{n+1} = A_{n+1} X_n + B_{n+1} in R^d; f(x) = <u, x>."""

    d: int
    a_mats: tuple  # of (d, d) float tuples
    b_vecs: tuple  # of (d,) float tuples
    probs: tuple[float, ...]
    u: tuple[float, ...]
    n_epsilon: float = 0.1

    def __post_init__(self):
        k = len(self.probs)
        if k == 0 or len(self.a_mats) != k or len(self.b_vecs) != k:
            raise DimensionError("g law needs matching A, B, p lists")
        if any(p < 0 for p in self.probs):
            raise StochasticityError("g probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise StochasticityError(f"g probabilities sum to {sum(self.probs)!r}")
        if len(self.u) != self.d or not any(self.u):
            raise DimensionError("u must be a nonzero vector of length d")
        for i, a in enumerate(self.a_mats):
            mat = np.asarray(a, dtype=np.float64)
            if mat.shape != (self.d, self.d):
                raise DimensionError(f"A[{i}] is not {self.d}x{self.d}")
            if abs(np.linalg.det(mat)) < 1e-300:
                raise SchemaError(f"A[{i}] is singular; the g law needs invertible A")
        for i, b in enumerate(self.b_vecs):
            if len(b) != self.d:
                raise DimensionError(f"B[{i}] is not length {self.d}")
        mean_b = np.zeros(self.d)
        for p, b in zip(self.probs, self.b_vecs):
            mean_b += p * np.asarray(b, dtype=np.float64)
        if np.max(np.abs(mean_b)) > 1e-12:
            raise SchemaError(f"B law must be centered, mean = {mean_b.tolist()!r}")
        if not self.n_epsilon > 0:
            raise SchemaError("n_epsilon must be > 0")

    @cached_property
    def a_arrays(self) -> np.ndarray:
        return np.array([np.asarray(a, dtype=np.float64) for a in self.a_mats])

    @cached_property
    def b_arrays(self) -> np.ndarray:
        return np.array([np.asarray(b, dtype=np.float64) for b in self.b_vecs])

    @cached_property
    def u_array(self) -> np.ndarray:
        return np.asarray(self.u, dtype=np.float64)

    @cached_property
    def cum(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.probs, dtype=np.float64))

    @cached_property
    def a_mean(self) -> np.ndarray:
        return np.tensordot(np.asarray(self.probs), self.a_arrays, axes=1)


@dataclass(frozen=True)
class WalkModel:
    """Uniform wrapper: state domain, one-step sampler, f and N evaluation."""

    spec: FiniteChainSpec | Affine1DSpec | AffineRdSpec

    @property
    def kind(self) -> str:
        if isinstance(self.spec, FiniteChainSpec):
            return "iid" if self.spec.is_iid else "finite"
        if isinstance(self.spec, Affine1DSpec):
            return "affine1d"
        return "affine_rd"

    @property
    def is_finite(self) -> bool:
        return isinstance(self.spec, FiniteChainSpec)

    def f(self, state) -> float:
        if isinstance(self.spec, FiniteChainSpec):
            return float(self.spec.f_values[self.spec.state_index(state)])
        if isinstance(self.spec, Affine1DSpec):
            return float(state)
        return float(np.dot(self.spec.u_array, np.asarray(state, dtype=np.float64)))

    def control(self, state) -> float:
        """Control function N: 0 for finite chains, |x|^(1+eps) for affine."""
        if isinstance(self.spec, FiniteChainSpec):
            return 0.0
        if isinstance(self.spec, Affine1DSpec):
            return abs(float(state)) ** (1.0 + self.spec.n_epsilon)
        norm = float(np.linalg.norm(np.asarray(state, dtype=np.float64)))
        return norm ** (1.0 + self.spec.n_epsilon)


def pick_index(cum: np.ndarray, u: float) -> int:
    """Inverse-CDF index: first i with cum[i] > u, clamped to the last cell.

    The single place defining how a uniform becomes a categorical draw;
    the simulation kernels implement the identical rule.
    """
    i = int(np.searchsorted(cum, u, side="right"))
    return min(i, len(cum) - 1)


def _load_finite(doc: dict) -> FiniteChainSpec:
    states = doc.get("states")
    matrix = doc.get("P")
    if not isinstance(states, list) or not states:
        raise SchemaError("finite model needs a nonempty 'states' list")
    if not isinstance(matrix, list):
        raise SchemaError("finite model needs a 'P' matrix")
    labels, f_values = [], []
    for i, entry in enumerate(states):
        if not isinstance(entry, dict) or "label" not in entry or "f" not in entry:
            raise SchemaError(f"states[{i}] must be an object with 'label' and 'f'")
        labels.append(str(entry["label"]))
        f_values.append(_as_fraction(entry["f"], f"states[{i}].f"))
    rows = []
    for i, row in enumerate(matrix):
        if not isinstance(row, list):
            raise SchemaError(f"P[{i}] must be a list")
        rows.append(tuple(_as_fraction(v, f"P[{i}][{j}]") for j, v in enumerate(row)))
    return FiniteChainSpec(tuple(labels), tuple(f_values), tuple(rows))


def _load_b_law(doc) -> UniformLaw | DiscreteLaw:
    if not isinstance(doc, dict):
        raise SchemaError("'b' must be an object")
    if "uniform" in doc:
        bounds = doc["uniform"]
        if not isinstance(bounds, list) or len(bounds) != 2:
            raise SchemaError("'b.uniform' must be [lo, hi]")
        return UniformLaw(float(bounds[0]), float(bounds[1]))
    if "support" in doc and "probs" in doc:
        return DiscreteLaw(
            tuple(float(v) for v in doc["support"]),
            tuple(float(v) for v in doc["probs"]),
        )
    raise SchemaError("'b' must have either 'uniform' or 'support'+'probs'")


def _load_affine1d(doc: dict) -> Affine1DSpec:
    a = doc.get("a")
    if not isinstance(a, dict) or "support" not in a or "probs" not in a:
        raise SchemaError("affine1d model needs 'a' with 'support' and 'probs'")
    return Affine1DSpec(
        a_support=tuple(float(v) for v in a["support"]),
        a_probs=tuple(float(v) for v in a["probs"]),
        b_law=_load_b_law(doc.get("b")),
        n_epsilon=float(doc.get("n_epsilon", 0.1)),
    )


def _load_affine_rd(doc: dict) -> AffineRdSpec:
    if "d" not in doc or "g" not in doc or "u" not in doc:
        raise SchemaError("affine_rd model needs 'd', 'g', and 'u'")
    if not isinstance(doc["g"], list) or not doc["g"]:
        raise SchemaError("'g' must be a nonempty list of {A, B, p} entries")
    a_mats, b_vecs, probs = [], [], []
    for i, entry in enumerate(doc["g"]):
        if not isinstance(entry, dict) or not {"A", "B", "p"} <= entry.keys():
            raise SchemaError(f"g[{i}] must be an object with 'A', 'B', 'p'")
        a_mats.append(tuple(tuple(float(v) for v in row) for row in entry["A"]))
        b_vecs.append(tuple(float(v) for v in entry["B"]))
        probs.append(float(entry["p"]))
    return AffineRdSpec(
        d=int(doc["d"]),
        a_mats=tuple(a_mats),
        b_vecs=tuple(b_vecs),
        probs=tuple(probs),
        u=tuple(float(v) for v in doc["u"]),
        n_epsilon=float(doc.get("n_epsilon", 0.1)),
    )


def load_model(config) -> WalkModel:
    """Build a validated WalkModel from a config document.

    Accepts a parsed dict, a JSON string, or a path to a JSON file.
    Rational fields of finite chains are parsed exactly.
    """
    if isinstance(config, Path):
        config = config.read_text()
    if isinstance(config, (str, bytes)):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise SchemaError(f"config must be a JSON object, got {type(config).__name__}")
    kind = config.get("type")
    if kind == "finite":
        return WalkModel(_load_finite(config))
    if kind == "affine1d":
        return WalkModel(_load_affine1d(config))
    if kind == "affine_rd":
        return WalkModel(_load_affine_rd(config))
    raise SchemaError(f"unknown model type {kind!r}")


def step(model: WalkModel, state, rng: SeededGenerator):
    """Draw one transition; deterministic given the generator state."""
    spec = model.spec
    if isinstance(spec, FiniteChainSpec):
        i = spec.state_index(state)
        j = pick_index(spec.p_cum[i], rng.uniform())
        return spec.labels[j]
    if isinstance(spec, Affine1DSpec):
        a = spec.a_support[pick_index(spec.a_cum, rng.uniform())]
        b = spec.b_law.sample(rng.uniform())
        return a * float(state) + b
    k = pick_index(spec.cum, rng.uniform())
    x = np.asarray(state, dtype=np.float64)
    if x.shape != (spec.d,):
        raise DimensionError(f"state must be a length-{spec.d} vector")
    return spec.a_arrays[k] @ x + spec.b_arrays[k]


@dataclass(frozen=True)
class CheckResult:
    name: str
    verdict: str  # PASS | FAIL | UNDECIDED
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    model_kind: str
    checks: tuple[CheckResult, ...] = field(default_factory=tuple)

    def verdict(self, name: str) -> str:
        for check in self.checks:
            if check.name == name:
                return check.verdict
        raise KeyError(name)

    @property
    def any_fail(self) -> bool:
        return any(c.verdict == FAIL for c in self.checks)

    @property
    def all_pass(self) -> bool:
        return all(c.verdict == PASS for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "checks": [
                {"name": c.name, "verdict": c.verdict, "detail": c.detail}
                for c in self.checks
            ],
            "any_fail": self.any_fail,
        }


def transition_graph(chain: FiniteChainSpec) -> list[list[int]]:
    """Adjacency lists of states reachable in one step with positive probability."""
    return [
        [j for j, v in enumerate(row) if v > 0] for row in chain.transition
    ]


def is_irreducible(chain: FiniteChainSpec) -> bool:
    """Strong connectivity of the positive-probability transition graph."""
    adj = transition_graph(chain)
    m = chain.n_states
    radj: list[list[int]] = [[] for _ in range(m)]
    for i, outs in enumerate(adj):
        for j in outs:
            radj[j].append(i)

    def reach(start: int, edges: list[list[int]]) -> set[int]:
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for nxt in edges[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    return len(reach(0, adj)) == m and len(reach(0, radj)) == m


def chain_period(chain: FiniteChainSpec) -> int:
    """gcd of cycle lengths, via BFS levels (chain must be irreducible)."""
    adj = transition_graph(chain)
    level = {0: 0}
    queue = [0]
    g = 0
    while queue:
        node = queue.pop(0)
        for nxt in adj[node]:
            if nxt not in level:
                level[nxt] = level[node] + 1
                queue.append(nxt)
            else:
                g = math.gcd(g, level[node] + 1 - level[nxt])
    return abs(g) if g else 0


def degenerate_f(chain: FiniteChainSpec) -> bool:
    """True when the f-sum vanishes along every cycle of the chain.

    Equivalent to f(v) = psi(v) - psi(u) across every positive-probability
    edge u -> v for some potential psi; checked exactly by assigning psi on
    a spanning tree and testing the remaining edges. Assumes irreducibility.
    """
    adj = transition_graph(chain)
    psi: dict[int, Fraction] = {0: Fraction(0)}
    order = [0]
    queue = [0]
    while queue:
        node = queue.pop(0)
        for nxt in adj[node]:
            if nxt not in psi:
                psi[nxt] = psi[node] + chain.f_values[nxt]
                order.append(nxt)
                queue.append(nxt)
    for node in order:
        for nxt in adj[node]:
            if psi[nxt] - psi[node] != chain.f_values[nxt]:
                return False
    return True


def _validate_finite(chain: FiniteChainSpec) -> ValidationReport:
    checks = []
    irreducible = is_irreducible(chain)
    checks.append(
        CheckResult(
            "irreducibility",
            PASS if irreducible else FAIL,
            "transition graph strongly connected"
            if irreducible
            else "transition graph is not strongly connected",
        )
    )
    if irreducible:
        period = chain_period(chain)
        checks.append(
            CheckResult(
                "aperiodicity",
                PASS if period == 1 else FAIL,
                f"period {period}",
            )
        )
        nu = stationary_exact([list(row) for row in chain.transition])
        mu = dot(nu, list(chain.f_values))
        checks.append(
            CheckResult(
                "centering",
                PASS if mu == 0 else FAIL,
                f"stationary mean of f is {mu}",
            )
        )
        degenerate = degenerate_f(chain)
        checks.append(
            CheckResult(
                "non_degeneracy",
                FAIL if degenerate else PASS,
                "f sums to zero along every cycle (variance degenerates)"
                if degenerate
                else "some cycle has nonzero f sum",
            )
        )
    else:
        for name in ("aperiodicity", "centering", "non_degeneracy"):
            checks.append(
                CheckResult(name, UNDECIDED, "needs an irreducible chain")
            )
    kind = "iid" if chain.is_iid else "finite"
    return ValidationReport(kind, tuple(checks))


def _contraction_estimate(model: WalkModel, delta: float = 0.1,
                          n_prod: int = 20, n_samples: int = 100_000,
                          seed: int = DEFAULT_SEED) -> tuple[float, float]:
    """Monte Carlo power mean k(delta) = (E |Pi_n|^(2+2 delta))^(1/n).

    |Pi_n| is the absolute n-fold product of a draws (1-D) or the operator
    norm of the matrix product (R^d). Returns (estimate, half-width of a
    2-standard-error band propagated through the 1/n power).
    """
    spec = model.spec
    power = 2.0 + 2.0 * delta
    streams = np.arange(n_samples, dtype=np.uint64)
    if isinstance(spec, Affine1DSpec):
        log_abs = np.zeros(n_samples)
        support = np.asarray(spec.a_support)
        for k in range(1, n_prod + 1):
            u, _ = step_uniforms(seed, streams, k, slot=2)
            idx = np.minimum(
                np.searchsorted(spec.a_cum, u, side="right"), len(support) - 1
            )
            with np.errstate(divide="ignore"):
                log_abs += np.log(np.abs(support[idx]))
        vals = np.exp(power * log_abs)
    else:
        prods = np.broadcast_to(np.eye(spec.d), (n_samples, spec.d, spec.d)).copy()
        for k in range(1, n_prod + 1):
            u, _ = step_uniforms(seed, streams, k, slot=2)
            idx = np.minimum(
                np.searchsorted(spec.cum, u, side="right"), len(spec.probs) - 1
            )
            prods = np.matmul(spec.a_arrays[idx], prods)
        norms = np.linalg.norm(prods, ord=2, axis=(1, 2))
        vals = norms**power
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    if mean <= 0:
        return 0.0, 0.0
    k_hat = mean ** (1.0 / n_prod)
    lo = max(mean - 2 * se, 1e-300) ** (1.0 / n_prod)
    hi = (mean + 2 * se) ** (1.0 / n_prod)
    return k_hat, max(k_hat - lo, hi - k_hat)


def _validate_affine(model: WalkModel) -> ValidationReport:
    spec = model.spec
    checks = []
    if isinstance(spec, Affine1DSpec):
        mean_b = spec.b_law.mean
        detail = f"E(b) = {mean_b!r}"
    else:
        mean_b = float(
            np.max(np.abs(np.tensordot(np.asarray(spec.probs), spec.b_arrays, axes=1)))
        )
        detail = f"max |E(B)| component = {mean_b!r}"
    checks.append(
        CheckResult("H4_centering", PASS if abs(mean_b) <= 1e-12 else FAIL, detail)
    )
    k_hat, band = _contraction_estimate(model)
    if k_hat + band < 1.0:
        verdict, note = PASS, f"k(0.1) = {k_hat:.6f} +- {band:.6f} < 1"
    elif k_hat - band > 1.0:
        verdict, note = FAIL, f"k(0.1) = {k_hat:.6f} +- {band:.6f} > 1"
    else:
        verdict, note = UNDECIDED, (
            f"k(0.1) = {k_hat:.6f} +- {band:.6f}; confidence band contains 1"
        )
    checks.append(CheckResult("H1_contraction", verdict, note))
    checks.append(
        CheckResult(
            "H2_no_invariant_subspace",
            UNDECIDED,
            "deciding invariant affine subspaces exactly is out of scope; "
            "inspect the support of the A law by hand",
        )
    )
    checks.append(
        CheckResult(
            "H3_transposed_inverse",
            UNDECIDED,
            "the fixed-vector condition on transposed inverses is not "
            "algorithmically decided; inspect by hand",
        )
    )
    return ValidationReport(model.kind, tuple(checks))


def validate_model(model: WalkModel) -> ValidationReport:
    """Best-effort verdicts on the standing hypotheses, with reasons."""
    if isinstance(model.spec, FiniteChainSpec):
        return _validate_finite(model.spec)
    return _validate_affine(model)
