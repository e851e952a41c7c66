"""Galton-Watson generation sizes under an infinite-mean progeny law.

Sizes are carried as natural logs. Exact simulation sums offspring counts
chunk by chunk; once the population is astronomically large, the surrogate
recursion replaces the sum of ``N`` offspring counts by
``N**(1/alpha) * scale * S`` with ``S`` positive stable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._random import as_rng, uniforms
from .distributions import ProgenyLaw, sample_positive_stable
from .errors import DomainError, UndefinedStatisticError

_CHUNK = 1 << 20


@dataclass
class PopulationPath:
    log_sizes: np.ndarray
    mode: str = "exact"
    alpha: float | None = None
    switch_generation: int | None = None
    truncated: bool = False

    def __post_init__(self):
        self.log_sizes = np.asarray(self.log_sizes, dtype=float)

    @property
    def n(self) -> int:
        return len(self.log_sizes) - 1


@dataclass
class WEstimate:
    value: float
    generation: int
    increments: np.ndarray = field(default_factory=lambda: np.zeros(0))


def offspring_total(law, parents: int, rng, chunk: int = _CHUNK) -> float:
    """Total offspring of ``parents`` particles, in O(chunk) memory."""
    total = 0.0
    left = int(parents)
    while left > 0:
        m = min(left, chunk)
        total += float(np.sum(law.sample(uniforms(rng, m))))
        left -= m
    return total


def simulate_exact_sizes(law, n_max: int, cap: int, rng) -> PopulationPath:
    """Exact generation sizes up to ``n_max``; stops after the first ``Z_i > cap``."""
    if n_max < 1 or cap < 1:
        raise DomainError("n_max and cap must be >= 1")
    rng = as_rng(rng)
    sizes = [1.0]
    truncated = False
    for _ in range(n_max):
        z = offspring_total(law, int(sizes[-1]), rng)
        sizes.append(z)
        if z > cap:
            truncated = True
            break
    return PopulationPath(np.log(sizes), mode="exact", alpha=getattr(law, "alpha", None), truncated=truncated)


def stable_scale_theory(alpha: float) -> float:
    """Normalising constant of Pareto(alpha) sums: ``Gamma(1 - alpha)**(1/alpha)``."""
    return math.gamma(1.0 - alpha) ** (1.0 / alpha)


def calibrate_stable_scale(law: ProgenyLaw, rng, n_terms: int = 10_000, n_sums: int = 2_000,
                           n_stable: int = 200_000) -> float:
    """Fit ``c`` so that ``n**(-1/alpha) * sum(Z_i)`` matches ``c * S`` in log-median."""
    rng = as_rng(rng)
    a = law.alpha
    log_sums = np.empty(n_sums)
    for j in range(n_sums):
        log_sums[j] = math.log(offspring_total(law, n_terms, rng)) - math.log(n_terms) / a
    s = sample_positive_stable(a, uniforms(rng, n_stable), uniforms(rng, n_stable))
    return float(math.exp(np.median(log_sums) - np.median(np.log(s))))


def simulate_surrogate_sizes(law: ProgenyLaw, n_max: int, switch_log_size: float, rng,
                             scale: float | None = None) -> PopulationPath:
    """Exact sizes while ``log Z <= switch_log_size``, stable recursion after.

    ``scale`` defaults to the analytic constant; experiments pass a fitted one.
    """
    a = getattr(law, "alpha", None)
    if a is None or not 0.0 < a < 1.0:
        raise DomainError("surrogate recursion needs alpha in (0, 1)")
    if switch_log_size < math.log(1e4):
        raise DomainError("switch_log_size must be >= log(1e4)")
    rng = as_rng(rng)
    log_c = math.log(stable_scale_theory(a) if scale is None else scale)
    logs = [0.0]
    switch_gen = None
    for i in range(n_max):
        cur = logs[-1]
        if cur <= switch_log_size:
            logs.append(math.log(offspring_total(law, int(round(math.exp(cur))), rng)))
        else:
            if switch_gen is None:
                switch_gen = i
            s = float(sample_positive_stable(a, uniforms(rng), uniforms(rng)))
            logs.append(cur / a + log_c + math.log(s))
    return PopulationPath(np.array(logs), mode="hybrid", alpha=a, switch_generation=switch_gen)


def _log_z_plus_one(log_z):
    return np.logaddexp(np.asarray(log_z, dtype=float), 0.0)


def estimate_w(path: PopulationPath, alpha: float | None = None) -> WEstimate:
    """``alpha**n * log(Z_n + 1)`` at the last generation, with increments."""
    a = path.alpha if alpha is None else alpha
    if a is None:
        raise DomainError("alpha unknown for this path")
    if len(path.log_sizes) == 0:
        raise DomainError("empty path")
    gens = np.arange(len(path.log_sizes))
    w_seq = a**gens * _log_z_plus_one(path.log_sizes)
    return WEstimate(value=float(w_seq[-1]), generation=int(gens[-1]), increments=np.abs(np.diff(w_seq)))


def mass_concentration_stat(path: PopulationPath, s: float) -> float:
    """``log(sum_{i<n} Z_i**s) / log Z_n`` evaluated with log-sum-exp."""
    logs = path.log_sizes
    if len(logs) < 2:
        raise DomainError("need at least two generations")
    if s <= 0:
        raise DomainError("s must be positive")
    if logs[-1] == 0.0:
        raise UndefinedStatisticError("log Z_n = 0")
    return float(special.logsumexp(s * logs[:-1]) / logs[-1])


def heavy_sum_log_ratio(law, n: int, rng) -> float:
    """``log(sum of n offspring counts) / log n``."""
    if n < 2:
        raise DomainError("n must be >= 2")
    return math.log(offspring_total(law, n, as_rng(rng))) / math.log(n)
