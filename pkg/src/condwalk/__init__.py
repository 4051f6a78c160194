"""condwalk: a numerical laboratory for Markov walks conditioned to stay positive.

The walk S_n = f(X_1) + ... + f(X_n) rides a Markov chain; condwalk
computes the law of its exit time below zero (exact lattice dynamic
programming for finite chains, reproducible Monte Carlo for general
models), the harmonic function V that governs survival asymptotics, the
Rayleigh limit of the conditioned endpoint, and the Brownian closed
forms they converge to.
"""

from importlib.resources import files as _files
from pathlib import Path as _Path

from .brownian import (
    BrownianParams,
    asymptotic_tail,
    bm_band_probability,
    bm_survival,
    rayleigh_cdf,
)
from .errors import (
    CellBudgetExceeded,
    CondwalkError,
    DegenerateVariance,
    DimensionError,
    DomainError,
    ExtinctAtHorizon,
    IdentityViolation,
    NoSurvivors,
    NonLatticeInput,
    NotConverged,
    NotIrreducible,
    SchemaError,
    SingularBeyondNullspace,
    StochasticityError,
    TooManyCensored,
)
from .exact import (
    EXACT_RATIONAL,
    FLOAT,
    DomainClassification,
    HarmonicEstimate,
    LatticeFrontier,
    PointClassification,
    StepCDF,
    SurvivalCurve,
    as_rational,
    asymptotic_variance,
    centering_check,
    classify_domain,
    conditional_law_dp,
    harmonic_value_dp,
    stationary_distribution,
    survival_dp,
    variance_series,
    walk_lattice,
)
from .martingale import (
    AffinePoissonSolution,
    ExitTriple,
    PoissonSolution,
    collect_exit_triples,
    estimate_V_martingale,
    estimate_W,
    estimate_W_hat,
    martingale_lattice,
    martingale_path,
    solve_poisson,
    write_exit_triples,
)
from .mc import (
    EstimateWithError,
    affine1d_variance,
    berry_esseen_diag,
    conditional_law_mc,
    estimate_survival,
    estimate_variance,
    ks_rayleigh,
    survival_curve_mc,
)
from .models import (
    Affine1DSpec,
    AffineRdSpec,
    FiniteChainSpec,
    ValidationReport,
    WalkModel,
    load_model,
    validate_model,
)
from .rng import DEFAULT_SEED, SeededGenerator

__version__ = "0.1.0"


def fixture_path(name: str) -> _Path:
    """Path of a bundled model config (finite4, affine1d, iid_pm1)."""
    if not name.endswith(".json"):
        name = name + ".json"
    return _Path(str(_files("condwalk") / "fixtures" / name))
