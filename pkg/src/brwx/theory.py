"""Limit constants for the rightmost particle and their finite-depth versions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "light_tail_constant",
    "f_closed",
    "f_recursive",
    "f_sequence",
    "f_bruteforce_oracle",
    "alpha_k_closed",
    "alpha_k_recursive",
    "light_tail_finite_target",
    "deterministic_limit_factor",
    "frechet_kth_cdf",
    "cloud_speed_heavy",
    "cloud_speed_light",
    "regvar_geometric_sum",
    "regvar_geometric_limit",
    "LimitConstants",
    "limit_constants",
]


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")


def light_tail_constant(alpha: float, r: float) -> float:
    """``(1 - alpha**(1/(r-1)))**(1/r - 1)`` for r > 1, else 1."""
    _check_alpha(alpha)
    if r <= 0:
        raise DomainError("r must be positive")
    if r <= 1.0:
        return 1.0
    return (1.0 - alpha ** (1.0 / (r - 1.0))) ** (1.0 / r - 1.0)


def f_closed(alpha: float, r: float, k: int) -> float:
    """Lower-bound constant at depth k: ``(sum_{i<=k} alpha**(i/(r-1)))**(1-1/r)``."""
    _check_alpha(alpha)
    if k < 0:
        raise DomainError("k must be >= 0")
    if r <= 1.0:
        return 1.0
    q = alpha ** (1.0 / (r - 1.0))
    return math.fsum(q**i for i in range(k + 1)) ** (1.0 - 1.0 / r)


def f_sequence(alpha: float, r: float, k: int) -> list[float]:
    """``[f_0, ..., f_k]`` via the one-step supremum recursion."""
    _check_alpha(alpha)
    if k < 0:
        raise DomainError("k must be >= 0")
    out = [1.0]
    for j in range(1, k + 1):
        prev = out[-1]
        if r > 1.0:
            out.append((alpha ** (j / (r - 1.0)) + prev ** (r / (r - 1.0))) ** (1.0 - 1.0 / r))
        else:
            out.append(max(alpha ** (j / r), prev))
    return out


def f_recursive(alpha: float, r: float, k: int) -> float:
    return f_sequence(alpha, r, k)[-1]


def f_bruteforce_oracle(alpha: float, r: float, k: int, grid_step: float) -> float:
    """Grid maximisation of ``h_k(delta_0..delta_k)``.

    Uses ``h_j = (alpha**j d_j)**(1/r) + (1 - d_j)**(1/r) h_{j-1}`` and
    optimises one coordinate per level, each over
    ``{0, step, 2 step, ..., 1}``. The endpoints are the limits of the open
    interval; the objective is continuous on the closed cube.
    """
    if not 0.0 < grid_step <= 0.1:
        raise DomainError("grid_step must be in (0, 0.1]")
    m = int(round(1.0 / grid_step))
    d = np.linspace(0.0, 1.0, m + 1)
    a = d ** (1.0 / r)
    b = (1.0 - d) ** (1.0 / r)
    best = float(np.max(a))
    for j in range(1, k + 1):
        best = float(np.max(alpha ** (j / r) * a + b * best))
    return best


def alpha_k_closed(alpha: float, r: float, k: int) -> float:
    """Upper-bound growth factor over k generations."""
    _check_alpha(alpha)
    if k < 1:
        raise DomainError("k must be >= 1")
    if r <= 1.0:
        return alpha ** (-k / r)
    q = alpha ** (-1.0 / (r - 1.0))
    return math.fsum(q**i for i in range(1, k + 1)) ** (1.0 - 1.0 / r)


def alpha_k_recursive(alpha: float, r: float, k: int) -> float:
    _check_alpha(alpha)
    if k < 1:
        raise DomainError("k must be >= 1")
    val = alpha ** (-1.0 / r)
    for _ in range(1, k):
        if r > 1.0:
            val = alpha ** (-1.0 / r) * (val ** (r / (r - 1.0)) + 1.0) ** ((r - 1.0) / r)
        else:
            val = alpha ** (-1.0 / r) * val
    return val


def light_tail_finite_target(alpha: float, r: float, n: int) -> float:
    """``(sum_{t<n} alpha**(t/(r-1)))**(1-1/r)`` (1 when r <= 1), for n >= 1."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return f_closed(alpha, r, n - 1)


def deterministic_limit_factor(alpha: float, r: float, w: float) -> float:
    """``max((1 - alpha**(1/(r-1)))_+**(1/r - 1), 1) * w**(1/r)``."""
    _check_alpha(alpha)
    if w < 0:
        raise DomainError("w must be >= 0")
    if r == 1.0:
        c = 1.0
    else:
        pp = max(1.0 - alpha ** (1.0 / (r - 1.0)), 0.0)
        e = 1.0 / r - 1.0
        c = 0.0 if pp == 0.0 and e > 0 else pp**e
    return max(c, 1.0) * w ** (1.0 / r)


def frechet_kth_cdf(beta: float, k: int, x):
    """Limit law of the k-th largest scaled position: ``P(Poisson(x**-beta) <= k-1)``."""
    if beta <= 0 or k < 1:
        raise DomainError("need beta > 0 and k >= 1")
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise DomainError("x must be positive")
    t = xs ** (-beta)
    # Poisson(t) cdf at k-1 via the regularised incomplete gamma; monotone to the last ulp
    out = np.where(np.isinf(t), 0.0, special.pdtr(k - 1, np.where(np.isinf(t), 0.0, t)))
    return float(out) if out.ndim == 0 else out


def cloud_speed_heavy(alpha: float) -> float:
    _check_alpha(alpha)
    return -math.log(alpha)


def cloud_speed_light(alpha: float, r: float) -> float:
    _check_alpha(alpha)
    if r <= 0:
        raise DomainError("r must be positive")
    return -math.log(alpha) / r


def regvar_geometric_sum(rho: float, a: float, h, n: int) -> float:
    """``sum_{i=1..n} h(a**-i) / h(a**-n)`` for regularly varying ``h``."""
    if rho <= 0 or not 0.0 < a < 1.0:
        raise DomainError("need rho > 0 and a in (0, 1)")
    if n < 1:
        raise DomainError("n must be >= 1")
    denom = float(h(a ** (-n)))
    if denom == 0.0 or not math.isfinite(denom):
        raise DomainError("h(a**-n) must be finite and nonzero")
    return math.fsum(float(h(a ** (-i))) / denom for i in range(1, n + 1))


def regvar_geometric_limit(rho: float, a: float) -> float:
    return 1.0 / (1.0 - a**rho)


@dataclass
class LimitConstants:
    alpha: float
    r: float
    light_constant: float
    f_sequence: list
    alpha_sequence: list
    cloud_speed: float


def limit_constants(alpha: float, r: float, k: int = 10) -> LimitConstants:
    return LimitConstants(
        alpha=alpha,
        r=r,
        light_constant=light_tail_constant(alpha, r),
        f_sequence=[f_closed(alpha, r, j) for j in range(k + 1)],
        alpha_sequence=[alpha_k_closed(alpha, r, j) for j in range(1, k + 1)],
        cloud_speed=cloud_speed_light(alpha, r),
    )
