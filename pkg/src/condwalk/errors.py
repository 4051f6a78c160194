"""Exception types raised across the package.

Grouped here so callers can catch them without importing the heavy modules.
"""


class CondwalkError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(CondwalkError):
    """Model config document is missing a field or has a wrongly typed one."""


class StochasticityError(CondwalkError):
    """A transition-matrix row does not sum to exactly 1."""


class DimensionError(CondwalkError):
    """Labels, f values, and matrix dimensions disagree."""


class NotIrreducible(CondwalkError):
    """The chain's transition graph is not strongly connected."""


class DegenerateVariance(CondwalkError):
    """Asymptotic variance is zero (or indistinguishable from zero)."""


class NonLatticeInput(CondwalkError):
    """Exact lattice DP needs rational increments and start; input is not."""


class CellBudgetExceeded(CondwalkError):
    """The DP frontier would need more lattice cells than the budget allows."""


class ExtinctAtHorizon(CondwalkError):
    """Conditional law requested at a horizon where survival mass is zero."""


class SingularBeyondNullspace(CondwalkError):
    """Poisson system inconsistent: f is not centered for this chain."""


class IdentityViolation(CondwalkError):
    """The coupling identity z+M_n = y+S_n+r(X_n) failed on a simulated path."""


class TooManyCensored(CondwalkError):
    """More than the tolerated fraction of paths hit the step cap n_max."""


class NoSurvivors(CondwalkError):
    """Zero Monte Carlo paths survived to the requested horizon."""


class DomainError(CondwalkError):
    """Argument outside a closed-form function's mathematical domain."""


class NotConverged(RuntimeWarning):
    """Limit estimator hit its horizon cap before the Cauchy test passed.

    Issued as a warning, not raised: the estimate is still returned with an
    honest error bound and ``converged_at`` left as None.
    """
