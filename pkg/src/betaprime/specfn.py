"""Special functions for the beta-prime family.

Gamma and beta functions, the incomplete beta function through the
Abramowitz-Stegun 26.5.4 power series, the one-dimensional beta-prime CDF
and the tail integral of ``(1 + x^2)^(-gamma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SERIES_RTOL = 1e-15
SERIES_MAX_TERMS = 10_000


class SeriesConvergenceError(ArithmeticError):
    """Raised when the incomplete beta series exhausts its term budget."""


@dataclass(frozen=True)
class IncompleteBetaArgs:
    z: float
    a: float
    b: float

    def __post_init__(self):
        if not 0.0 <= self.z <= 1.0:
            raise ValueError(f"z must lie in [0, 1], got {self.z}")
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"a and b must be positive, got a={self.a}, b={self.b}")


@dataclass(frozen=True)
class Cdf1dParams:
    beta: float

    def __post_init__(self):
        if not self.beta > 0.5:
            raise ValueError(f"1-D beta-prime needs beta > 1/2, got {self.beta}")


def _clamp01(p: float) -> float:
    return min(1.0, max(0.0, p))


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"log_gamma is only defined here for x > 0, got {x}")
    return math.lgamma(x)


def log_beta(a: float, b: float) -> float:
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)


def beta_fn(a: float, b: float) -> float:
    """Complete beta function B(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError(f"beta_fn needs a, b > 0, got a={a}, b={b}")
    return math.exp(log_beta(a, b))


def _as_series(z: float, a: float, b: float) -> float:
    # B(z;a,b) = z^a (1-z)^b / a * (1 + sum_{n>=0} B(a+1,n+1)/B(a+b,n+1) z^(n+1))
    # consecutive terms have ratio z (a+b+n)/(a+n+1)
    term = z * (a + b) / (a + 1.0)
    total = 1.0
    for n in range(SERIES_MAX_TERMS):
        total += term
        if not math.isfinite(total):
            break
        if term < SERIES_RTOL * total:
            return math.exp(a * math.log(z) + b * math.log1p(-z) - math.log(a)) * total
        term *= z * (a + b + n + 1) / (a + n + 2)
    raise SeriesConvergenceError(
        f"incomplete beta series did not converge in {SERIES_MAX_TERMS} terms (z={z}, a={a}, b={b})"
    )


def incomplete_beta(args: IncompleteBetaArgs) -> float:
    """Unregularized incomplete beta function B(z; a, b).

    Uses the power series for ``z <= 1/2`` and the reflection
    ``B(z; a, b) = B(a, b) - B(1 - z; b, a)`` above that.
    """
    z, a, b = args.z, args.a, args.b
    if z == 0.0:
        return 0.0
    if z == 1.0:
        return beta_fn(a, b)
    if z <= 0.5:
        return _as_series(z, a, b)
    return beta_fn(a, b) - _as_series(1.0 - z, b, a)


def betainc(z: float, a: float, b: float) -> float:
    """Shorthand for ``incomplete_beta(IncompleteBetaArgs(z, a, b))``."""
    return incomplete_beta(IncompleteBetaArgs(z, a, b))


def normalization_1d(beta: float) -> float:
    """Density constant of the 1-D beta-prime law, Gamma(b)/(sqrt(pi) Gamma(b - 1/2))."""
    return math.exp(log_gamma(beta) - 0.5 * math.log(math.pi) - log_gamma(beta - 0.5))


def tail_integral(h: float, gamma: float) -> float:
    """Integral of ``(1 + x^2)^(-gamma)`` over ``[h, inf)`` for ``h > 0``.

    Evaluated as ``B(1/(1+h^2); gamma - 1/2, 1/2) / 2`` after the substitution
    ``z = 1/(1+x^2)``.
    """
    if not h > 0:
        raise ValueError(f"tail_integral needs h > 0, got {h}")
    if not gamma > 0.5:
        raise ValueError(f"tail_integral needs gamma > 1/2, got {gamma}")
    return 0.5 * betainc(1.0 / (1.0 + h * h), gamma - 0.5, 0.5)


def tail_asymptote(h: float, gamma: float) -> float:
    """Reference order of magnitude ``h^(1 - 2 gamma)`` of the tail integral."""
    return h ** (1.0 - 2.0 * gamma)


def tail_series_factor(h: float, gamma: float) -> float:
    """The bracketed series factor of the tail integral, which lies in [1, 1 + 1/h^2].

    Obtained by dividing ``tail_integral`` by its leading term
    ``(1+h^2)^(1/2-gamma) (h^2/(1+h^2))^(1/2) / (2 gamma - 1)``.
    """
    lead = (1.0 + h * h) ** (0.5 - gamma) * math.sqrt(h * h / (1.0 + h * h)) / (2.0 * gamma - 1.0)
    return tail_integral(h, gamma) / lead


def _upper_tail_1d(h: float, beta: float) -> float:
    # P(X >= |h|) for the 1-D beta-prime law
    if h == 0.0:
        return 0.5
    return normalization_1d(beta) * tail_integral(abs(h), beta)


def betaprime_cdf_1d(h: float, p: Cdf1dParams) -> float:
    """CDF of the one-dimensional beta-prime law with tail exponent ``p.beta``."""
    q = _upper_tail_1d(h, p.beta)
    return _clamp01(1.0 - q if h >= 0 else q)


def betaprime_sf_1d(h: float, p: Cdf1dParams) -> float:
    """Survival function ``1 - F(h)``, computed without cancellation."""
    q = _upper_tail_1d(h, p.beta)
    return _clamp01(q if h >= 0 else 1.0 - q)
