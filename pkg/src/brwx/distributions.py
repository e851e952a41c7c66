"""Progeny and displacement laws.

All samplers are inverse-transform maps of caller-supplied uniforms, so the
laws themselves hold no random state and can be shared freely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "ProgenyLaw",
    "DegenerateProgeny",
    "DisplacementLaw",
    "Pareto",
    "Weibull",
    "Gaussian",
    "Exponential",
    "sample_progeny",
    "tail_progeny",
    "quantile",
    "hazard",
    "inverse_hazard",
    "sample_positive_stable",
    "davies_gamma",
    "davies_envelope_holds",
]


def _scalar_or_array(out):
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _check_open_unit(u, name="u"):
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0.0)) or np.any(~(u < 1.0)):
        raise DomainError(f"{name} must lie strictly inside (0, 1)")
    return u


# ---------------------------------------------------------------------------
# progeny


@dataclass(frozen=True)
class ProgenyLaw:
    """Floor-Pareto offspring law ``Z = floor(U**(-1/alpha))``.

    ``P(Z >= k) = k**-alpha`` for integers ``k >= 1``, so ``Z >= 1`` almost
    surely and the tree never dies out. The mean is infinite and ``alpha`` is
    the moment index.
    """

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must be in (0, 1), got {self.alpha}")

    def sample(self, u):
        """Offspring counts for uniforms ``u``, as float64 (may exceed int64)."""
        u = _check_open_unit(u)
        return _scalar_or_array(np.floor(u ** (-1.0 / self.alpha)))

    def tail(self, k):
        """``P(Z >= k)`` for integer ``k >= 1``."""
        k = np.asarray(k, dtype=float)
        if np.any(k < 1):
            raise DomainError("k must be >= 1")
        return _scalar_or_array(np.floor(k) ** -self.alpha)

    def survival(self, x):
        """``P(Z > x)`` for real ``x``."""
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(np.where(x < 1.0, 1.0, (np.floor(x) + 1.0) ** -self.alpha))


@dataclass(frozen=True)
class DegenerateProgeny:
    """Every particle has exactly ``m`` children. Used as a test double."""

    m: int = 1
    alpha: float | None = None

    def sample(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(np.full(u.shape, float(self.m)))

    def tail(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k < 1):
            raise DomainError("k must be >= 1")
        return _scalar_or_array(np.where(k <= self.m, 1.0, 0.0))


def sample_progeny(law, u):
    return law.sample(u)


def tail_progeny(law, k):
    return law.tail(k)


def davies_gamma(x, c=1.0):
    """Envelope exponent ``c / (1 + log x)``."""
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(c / (1.0 + np.log(x)))


def davies_envelope_holds(law: ProgenyLaw, grid, c=1.0, x0=2.0) -> bool:
    """Check ``x**-g(x) <= x**alpha * P(Z > x) <= x**g(x)`` on ``grid``.

    Points below ``x0`` are ignored. Comparison is done on the log scale.
    """
    x = np.asarray(grid, dtype=float)
    x = x[x >= x0]
    if x.size == 0:
        raise DomainError("grid has no points at or above x0")
    logx = np.log(x)
    mid = law.alpha * logx + np.log(law.survival(x))
    bound = davies_gamma(x, c) * logx
    return bool(np.all(mid >= -bound) and np.all(mid <= bound))


def sample_positive_stable(alpha, u1, u2):
    """Positive stable variate with Laplace transform ``exp(-lam**alpha)``.

    Kanter's representation: with ``theta = pi*u1`` and ``E = -log(u2)``,
    ``S = sin(a t) / sin(t)**(1/a) * (sin((1-a) t) / E)**((1-a)/a)``.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    u1 = _check_open_unit(u1, "u1")
    u2 = _check_open_unit(u2, "u2")
    theta = np.pi * u1
    e = -np.log(u2)
    a = alpha
    log_s = (
        np.log(np.sin(a * theta))
        - np.log(np.sin(theta)) / a
        + (1.0 - a) / a * (np.log(np.sin((1.0 - a) * theta)) - np.log(e))
    )
    return _scalar_or_array(np.exp(log_s))


# ---------------------------------------------------------------------------
# displacements


class DisplacementLaw:
    """Base class for displacement laws.

    Subclasses provide ``log_tail``, ``tail_quantile`` (``F^<-(1 - q)``),
    ``hazard`` and ``inverse_hazard``. ``index`` is the tail index: beta for
    regularly varying laws, the hazard index r for lighter tails.
    """

    regularly_varying = False
    nonnegative = False
    index: float

    def log_tail(self, x):
        raise NotImplementedError

    def tail_quantile(self, q):
        raise NotImplementedError

    def tail(self, x):
        return _scalar_or_array(np.exp(self.log_tail(x)))

    def cdf(self, x):
        return _scalar_or_array(-np.expm1(self.log_tail(x)))

    def quantile(self, p):
        p = _check_open_unit(p, "p")
        return self.tail_quantile(1.0 - p)

    def hazard(self, x):
        """``K(x) = -log(1 - F(x))``."""
        k = -np.asarray(self.log_tail(x), dtype=float)
        if np.any(np.isinf(k)):
            raise OverflowError("tail probability underflows to zero")
        return _scalar_or_array(k + 0.0)

    def inverse_hazard(self, u):
        raise NotImplementedError

    def sample(self, u):
        """Inverse-transform draws; ``u`` is used as the tail probability."""
        return self.tail_quantile(u)


@dataclass(frozen=True)
class Pareto(DisplacementLaw):
    """``1 - F(x) = x**-beta`` on ``x >= 1``."""

    beta: float
    regularly_varying = True
    nonnegative = True

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError("beta must be positive")

    @property
    def index(self):
        return self.beta

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return _scalar_or_array(np.where(x < 1.0, 0.0, -self.beta * np.log(np.maximum(x, 1.0))))

    def tail_quantile(self, q):
        q = _check_open_unit(q, "q")
        return _scalar_or_array(q ** (-1.0 / self.beta))

    def inverse_hazard(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise DomainError("u must be >= 0")
        return _scalar_or_array(np.exp(u / self.beta))


@dataclass(frozen=True)
class Weibull(DisplacementLaw):
    """``K(x) = c * x**r`` on ``x >= 0``."""

    r: float
    c: float = 1.0
    nonnegative = True

    def __post_init__(self):
        if not (self.r > 0 and self.c > 0):
            raise DomainError("r and c must be positive")

    @property
    def index(self):
        return self.r

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(-self.c * np.maximum(x, 0.0) ** self.r)

    def tail_quantile(self, q):
        q = _check_open_unit(q, "q")
        return _scalar_or_array((-np.log(q) / self.c) ** (1.0 / self.r))

    def inverse_hazard(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise DomainError("u must be >= 0")
        return _scalar_or_array((u / self.c) ** (1.0 / self.r))


@dataclass(frozen=True)
class Exponential(DisplacementLaw):
    """Exponential law on ``[0, inf)``; hazard ``rate * x``, so r = 1."""

    rate: float = 1.0
    nonnegative = True

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("rate must be positive")

    @property
    def index(self):
        return 1.0

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(-self.rate * np.maximum(x, 0.0))

    def tail_quantile(self, q):
        q = _check_open_unit(q, "q")
        return _scalar_or_array(-np.log(q) / self.rate)

    def inverse_hazard(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise DomainError("u must be >= 0")
        return _scalar_or_array(u / self.rate)


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _gaussian_inverse_hazard(u: float, tol: float) -> float:
    if u == 0.0:
        return -math.inf
    if u < 700.0:
        x = -float(special.ndtri(math.exp(-u)))
    else:
        x = math.sqrt(2.0 * u - math.log(4.0 * math.pi * u))
    lo, hi = -math.inf, math.inf
    for _ in range(100):
        g = -float(special.log_ndtr(-x)) - u
        if g > 0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        slope = math.exp(-0.5 * x * x - _LOG_SQRT_2PI - float(special.log_ndtr(-x)))
        step = g / slope
        x_new = x - step
        if not lo < x_new < hi and math.isfinite(lo) and math.isfinite(hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < tol:
            return x_new
        x = x_new
    return x


@dataclass(frozen=True)
class Gaussian(DisplacementLaw):
    """Standard normal displacements; ``K(x) ~ x**2 / 2``."""

    tol: float = 1e-10

    @property
    def index(self):
        return 2.0

    def log_tail(self, x):
        return _scalar_or_array(special.log_ndtr(-np.asarray(x, dtype=float)))

    def tail_quantile(self, q):
        q = _check_open_unit(q, "q")
        return _scalar_or_array(-special.ndtri(q))

    def inverse_hazard(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise DomainError("u must be >= 0")
        out = np.vectorize(lambda v: _gaussian_inverse_hazard(float(v), self.tol), otypes=[float])(u)
        return _scalar_or_array(out)


def quantile(law: DisplacementLaw, p):
    return law.quantile(p)


def hazard(law: DisplacementLaw, x):
    return law.hazard(x)


def inverse_hazard(law: DisplacementLaw, u):
    return law.inverse_hazard(u)
