"""Closed-form Brownian limit objects the walk asymptotics converge to.

All formulas are reflection-principle identities for a driftless
Brownian motion with diffusion coefficient sigma, plus the Rayleigh
limit law of the conditioned endpoint and the survival-tail constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


def _phi(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def bm_survival(y: float, sigma: float, n: float) -> float:
    """P(y + sigma W_t > 0 for all t <= n) = 2 Phi(y / (sigma sqrt(n))) - 1."""
    if not y > 0:
        raise DomainError(f"start y must be > 0, got {y!r}")
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma!r}")
    if not n > 0:
        raise DomainError(f"horizon n must be > 0, got {n!r}")
    return 2.0 * _phi(y / (sigma * math.sqrt(n))) - 1.0


def bm_band_probability(a: float, b: float, y: float, sigma: float,
                        n: float) -> float:
    """P(a < y + sigma W_n <= b and the path stayed positive to n).

    Reflection at 0: the constrained density at v > 0 is the free
    density from y minus the free density from -y.
    """
    if not y > 0:
        raise DomainError(f"start y must be > 0, got {y!r}")
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma!r}")
    if not n > 0:
        raise DomainError(f"horizon n must be > 0, got {n!r}")
    if a > b:
        raise DomainError(f"band needs a <= b, got a={a!r} > b={b!r}")
    a = max(a, 0.0)
    b = max(b, 0.0)
    s = sigma * math.sqrt(n)
    direct = _phi((b - y) / s) - _phi((a - y) / s)
    reflected = _phi((b + y) / s) - _phi((a + y) / s)
    return direct - reflected


def rayleigh_cdf(t: float) -> float:
    """Limit law of the rescaled conditioned endpoint: 1 - exp(-t^2/2)."""
    if t < 0:
        raise DomainError(f"the Rayleigh law lives on t >= 0, got {t!r}")
    return 1.0 - math.exp(-0.5 * t * t)


def asymptotic_tail(v: float, n: float, sigma: float) -> float:
    """Leading survival-tail term 2 v / (sqrt(2 pi n) sigma).

    v is the harmonic-function value at the start point; the walk's
    survival probability p_n is asymptotically this expression.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma!r}")
    if not n > 0:
        raise DomainError(f"horizon n must be > 0, got {n!r}")
    if v < 0:
        raise DomainError(f"harmonic value must be >= 0, got {v!r}")
    return 2.0 * v / (math.sqrt(2.0 * math.pi * n) * sigma)


@dataclass(frozen=True)
class BrownianParams:
    """Diffusion coefficient bundle for the limit formulas."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma!r}")

    def survival(self, y: float, n: float) -> float:
        return bm_survival(y, self.sigma, n)

    def band_probability(self, a: float, b: float, y: float, n: float) -> float:
        return bm_band_probability(a, b, y, self.sigma, n)

    def tail(self, v: float, n: float) -> float:
        return asymptotic_tail(v, n, self.sigma)
