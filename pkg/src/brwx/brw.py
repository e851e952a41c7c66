"""Streaming branching random walk.

Only the current generation is held in memory. Each generation consumes
one block of uniforms for the offspring counts of all parents (in parent
order) followed by one block for the displacements of all children (in
child order).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._random import as_rng, uniforms
from .errors import DomainError, UndefinedStatisticError
from .population import PopulationPath

DEFAULT_THRESHOLDS = tuple(0.25 * 2.0**j for j in range(12))


@dataclass
class Frontier:
    generation: int
    positions: np.ndarray
    last_steps: np.ndarray | None = None

    @property
    def log_size(self) -> float:
        return math.log(len(self.positions))

    @classmethod
    def root(cls):
        return cls(0, np.zeros(1))


@dataclass
class StepOverflow:
    """Children would exceed the cap; nothing was allocated."""

    generation: int
    child_count: float


@dataclass
class ExtremeRecord:
    generation: int
    top_k: np.ndarray
    z_n: int | float
    c_n: float | None = None
    l_log_zn: float | None = None

    @property
    def m_n(self) -> float:
        return float(self.top_k[0])


@dataclass
class PointSample:
    thresholds: np.ndarray
    counts: np.ndarray
    # same counts using only the final displacement of each particle
    last_step_counts: np.ndarray | None = None


@dataclass
class BRWRun:
    record: ExtremeRecord
    points: PointSample | None
    path: PopulationPath
    truncated: bool = False
    overflow_count: float | None = None
    extras: dict = field(default_factory=dict)


def step_frontier(f: Frontier, progeny, disp, cap: int, rng):
    """Advance one generation, or return a :class:`StepOverflow`."""
    if len(f.positions) == 0:
        raise DomainError("empty frontier")
    if cap < 1:
        raise DomainError("cap must be >= 1")
    m = np.asarray(progeny.sample(uniforms(rng, len(f.positions))), dtype=float)
    total = float(m.sum())
    if total > cap:
        return StepOverflow(f.generation + 1, total)
    x = np.asarray(disp.sample(uniforms(rng, int(total))), dtype=float)
    children = np.repeat(f.positions, m.astype(np.int64)) + x
    return Frontier(f.generation + 1, children, x)


def _top_k(positions, k):
    k = min(k, len(positions))
    if k == len(positions):
        top = np.sort(positions)
    else:
        top = np.sort(np.partition(positions, -k)[-k:])
    return top[::-1].copy()


def exceedance_counts(values, levels):
    """Number of ``values`` strictly above each of ``levels``."""
    levels = np.asarray(levels, dtype=float)
    sel = np.sort(values[values > levels.min()])
    return len(sel) - np.searchsorted(sel, levels, side="right")


def _make_record(frontier: Frontier, disp, k: int) -> ExtremeRecord:
    z = len(frontier.positions)
    rec = ExtremeRecord(frontier.generation, _top_k(frontier.positions, k), z)
    if z >= 2:
        if disp.regularly_varying:
            rec.c_n = float(scaling_constant(disp, z))
        else:
            rec.l_log_zn = float(disp.inverse_hazard(math.log(z)))
    return rec


def run_brw(progeny, disp, n: int, k: int = 2, thresholds=DEFAULT_THRESHOLDS, cap: int = 10**7,
            rng=None, stop: str = "fixed") -> BRWRun:
    """Simulate generations ``0..n`` and extract extremes at the last one.

    ``stop="fixed"`` flags a cap overflow before generation ``n`` as truncated.
    ``stop="max_under_cap"`` instead ends at the last generation that fits.
    """
    if n < 1 or k < 1:
        raise DomainError("n and k must be >= 1")
    if stop not in ("fixed", "max_under_cap"):
        raise DomainError(f"unknown stop rule {stop!r}")
    rng = as_rng(rng)
    f = Frontier.root()
    log_sizes = [0.0]
    truncated = False
    overflow = None
    step_max_sum = 0.0
    for _ in range(n):
        nxt = step_frontier(f, progeny, disp, cap, rng)
        if isinstance(nxt, StepOverflow):
            overflow = nxt.child_count
            truncated = stop == "fixed"
            break
        f = nxt
        step_max_sum += float(f.last_steps.max())
        log_sizes.append(f.log_size)
    path = PopulationPath(np.array(log_sizes), mode="exact", alpha=getattr(progeny, "alpha", None),
                          truncated=truncated)
    rec = _make_record(f, disp, k)
    points = None
    if disp.regularly_varying and rec.c_n is not None:
        levels = np.asarray(thresholds, dtype=float) * rec.c_n
        last = None
        if f.last_steps is not None:
            last = exceedance_counts(f.last_steps, levels)
        points = PointSample(np.asarray(thresholds, dtype=float), exceedance_counts(f.positions, levels), last)
    run = BRWRun(rec, points, path, truncated, overflow)
    # M_n never exceeds the sum over generations of the largest single step
    run.extras["step_max_sum"] = step_max_sum
    if f.last_steps is not None:
        run.extras["last_step_top"] = _top_k(f.last_steps, k)
    return run


def scaling_constant(disp, z):
    """``F^<-(1 - 1/z)``; exact power for the Pareto law."""
    beta = getattr(disp, "beta", None)
    if beta is not None:
        return float(z) ** (1.0 / beta)
    return disp.tail_quantile(1.0 / float(z))


def scale_positions(rec: ExtremeRecord, disp) -> np.ndarray:
    if rec.z_n < 2:
        raise UndefinedStatisticError("scaling undefined for z_n < 2")
    return np.asarray(rec.top_k, dtype=float) / scaling_constant(disp, rec.z_n)


def scaled_max_ratio(rec: ExtremeRecord, disp) -> float:
    """``M_n / L(log Z_n)`` for a lighter-tailed law."""
    if disp.regularly_varying:
        raise DomainError("ratio is defined for lighter-tailed laws only")
    if rec.z_n < 2:
        raise UndefinedStatisticError("scaling undefined for z_n < 2")
    return rec.m_n / float(disp.inverse_hazard(math.log(rec.z_n)))


def log_plus(x: float) -> float:
    return math.log(x) if x > 1.0 else 0.0


def cloud_speed_stat(rec: ExtremeRecord, mode: str) -> float:
    if rec.generation < 1:
        raise DomainError("need n >= 1")
    if mode == "heavy":
        return log_plus(log_plus(rec.m_n)) / rec.generation
    if mode == "light":
        return log_plus(rec.m_n) / rec.generation
    raise DomainError(f"unknown mode {mode!r}")
