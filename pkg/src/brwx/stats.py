"""Goodness-of-fit and robust aggregation for simulated extremes.

Everything here is deterministic in its inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import DomainError, InsufficientDataError


@dataclass
class GofReport:
    test: str
    statistic: float
    n_samples: int
    passed: bool
    threshold: float
    notes: str = ""

    def as_dict(self):
        return {
            "test": self.test,
            "statistic": self.statistic,
            "n_samples": self.n_samples,
            "pass": self.passed,
            "threshold": self.threshold,
            "notes": self.notes,
        }


def ks_statistic(samples, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance of sorted ``samples`` to ``cdf``."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0:
        raise InsufficientDataError("empty sample")
    if np.any(np.diff(x) < 0):
        raise DomainError("samples must be sorted")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_report(samples, cdf, threshold: float, notes: str = "") -> GofReport:
    x = np.sort(np.asarray(samples, dtype=float))
    d = ks_statistic(x, cdf)
    return GofReport("ks", d, int(x.size), d <= threshold, threshold, notes)


def _poisson_bins(mean: float, n: int):
    """Integer bins with expected count >= 5, built left to right; the last is open."""
    top = max(3, int(math.ceil(mean + 6.0 * math.sqrt(mean) + 3)))
    probs = sps.poisson.pmf(np.arange(top), mean)
    probs = np.append(probs, sps.poisson.sf(top - 1, mean))
    starts, mass = [], []
    first, acc = 0, 0.0
    for j, p in enumerate(probs):
        acc += p
        if acc * n >= 5:
            starts.append(first)
            mass.append(acc)
            first, acc = j + 1, 0.0
    if not starts:
        return [0], np.array([acc])
    mass[-1] += acc
    return starts, np.array(mass)


def poisson_gof(counts, mean: float, level: float = 0.01, min_replicates: int = 100) -> GofReport:
    """Chi-square test of ``counts`` against Poisson(``mean``).

    Bins are 0, 1, 2, ... with an open top bin, merged until every expected
    count is at least 5; for small means this reduces to {0, 1, 2, >=3}.
    """
    c = np.asarray(counts, dtype=np.int64)
    n = c.size
    if mean <= 0:
        raise DomainError("mean must be positive")
    if n < min_replicates:
        raise InsufficientDataError(f"need >= {min_replicates} replicates, got {n}")
    starts, probs = _poisson_bins(mean, n)
    idx = np.searchsorted(np.asarray(starts), c, side="right") - 1
    observed = np.bincount(idx, minlength=len(starts)).astype(float)
    expected = probs * n
    dof = len(starts) - 1
    mean_rel = abs(c.mean() - mean) / mean
    labels = [str(s) for s in starts[:-1]] + [f">={starts[-1]}"]
    if dof < 1:
        return GofReport("poisson_chisq", math.inf, n, False, math.nan,
                         f"too few bins for chi-square; mean_rel_err={mean_rel:.4g}")
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    thr = float(sps.chi2.ppf(1.0 - level, dof))
    notes = f"bins={labels}; dof={dof}; p={sps.chi2.sf(chi2, dof):.4g}; mean_rel_err={mean_rel:.4g}"
    return GofReport("poisson_chisq", chi2, n, chi2 <= thr, thr, notes)


def poisson_mean_check(counts, mean: float, z: float = 4.0) -> GofReport:
    """Standardised distance of the sample mean from ``mean`` (Poisson variance)."""
    c = np.asarray(counts, dtype=float)
    if mean <= 0:
        raise DomainError("mean must be positive")
    if c.size == 0:
        raise InsufficientDataError("empty sample")
    stat = abs(c.mean() - mean) / math.sqrt(mean / c.size)
    return GofReport("poisson_mean", float(stat), int(c.size), stat <= z, z,
                     f"sample_mean={c.mean():.6g}")


def median_ci(samples, level: float = 0.95):
    """Distribution-free confidence interval for the median from order statistics."""
    if not 0.0 < level < 1.0:
        raise DomainError("level must be in (0, 1)")
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 20:
        raise InsufficientDataError("need >= 20 samples")
    tail = (1.0 - level) / 2.0
    # largest j with P(Bin(n, 1/2) <= j - 1) <= tail
    j = int(sps.binom.ppf(tail, n, 0.5))
    while j > 0 and sps.binom.cdf(j - 1, n, 0.5) > tail:
        j -= 1
    j = max(j, 1)
    return float(x[j - 1]), float(x[n - j])


def median_report(samples, target: float, level: float = 0.95, notes: str = "") -> GofReport:
    lo, hi = median_ci(samples, level)
    inside = lo <= target <= hi
    return GofReport("median_ci", float(np.median(samples)), int(np.size(samples)), inside, target,
                     f"ci=[{lo:.6g}, {hi:.6g}] level={level} {notes}".strip())
