"""Verification experiments: configuration, replicate execution and reports.

Each experiment runs ``replicates`` independent replicates on streams derived
from ``(master_seed, replicate index)``, aggregates them, and compares the
aggregates with the corresponding limit constants. Worker count never
changes the numbers.
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import io
import json
import logging
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, theory
from ._random import auxiliary_rng, replicate_rng, uniforms
from .brw import cloud_speed_stat, run_brw, scale_positions, scaled_max_ratio
from .distributions import Exponential, Gaussian, Pareto, ProgenyLaw, Weibull
from .population import (
    calibrate_stable_scale,
    estimate_w,
    heavy_sum_log_ratio,
    mass_concentration_stat,
    simulate_surrogate_sizes,
    stable_scale_theory,
)
from .errors import DomainError, InsufficientDataError
from .stats import ks_report, median_ci, poisson_gof, poisson_mean_check

EXPERIMENTS = (
    "gw_convergence",
    "mass_concentration",
    "heavy_point_process",
    "frechet_max",
    "cloud_speed_heavy",
    "light_tail_ratio",
    "cloud_speed_light",
    "lemma_order_stats",
    "lemma_heavy_sums",
    "lemma_regvar_sum",
    "constants_table",
)

CSV_COLUMNS = ("replicate", "z_n_log", "w_hat", "m_n", "ratio", "truncated")

log = logging.getLogger("brwx")

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 64


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    alpha: float = 0.8
    beta_or_r: float = 1.0
    n: int = 4
    k: int = 2
    replicates: int = 100
    cap: int = 10**7
    thresholds: tuple = (1.0, 2.0, 4.0)
    gof_thresholds: tuple = (2.0, 4.0)
    master_seed: int = 0
    surrogate_switch: float = math.log(1e6)
    displacement: str = "pareto"
    stop: str = "fixed"
    delta: float = 0.5
    s: tuple = (1.0, 2.0)
    a: float = 0.5
    h: str = "power"
    grid_step: float = 1e-3
    tol: float | None = None
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha", "must be in (0, 1)")
        if not self.beta_or_r > 0:
            raise ConfigError("beta_or_r", "must be positive")
        for name in ("n", "k", "replicates", "cap"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed", "must be a 64-bit unsigned integer")
        if self.displacement not in ("pareto", "gaussian", "exponential", "weibull"):
            raise ConfigError("displacement", f"unknown law {self.displacement!r}")
        if self.stop not in ("fixed", "max_under_cap"):
            raise ConfigError("stop", "must be 'fixed' or 'max_under_cap'")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError("delta", "must be in (0, 1]")
        if any(x <= 0 for x in self.thresholds) or list(self.thresholds) != sorted(self.thresholds):
            raise ConfigError("thresholds", "must be positive and increasing")
        if not set(self.gof_thresholds) <= set(self.thresholds):
            raise ConfigError("gof_thresholds", "must be a subset of thresholds")
        if any(v <= 0 for v in self.s):
            raise ConfigError("s", "must be positive")
        if not 0.0 < self.a < 1.0:
            raise ConfigError("a", "must be in (0, 1)")
        if self.h not in ("power", "power_log"):
            raise ConfigError("h", "must be 'power' or 'power_log'")
        if not 0.0 < self.grid_step <= 0.1:
            raise ConfigError("grid_step", "must be in (0, 0.1]")
        if self.surrogate_switch < math.log(1e4):
            raise ConfigError("surrogate_switch", "must be >= log(1e4)")

    @classmethod
    def for_experiment(cls, experiment, **overrides):
        if experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {experiment!r}")
        kw = dict(DEFAULTS.get(experiment, {}))
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(experiment=experiment, **kw)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                s = ""
            elif isinstance(v, tuple):
                s = ",".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides):
        kw = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(line, "expected 'key = value'")
            key, val = (p.strip() for p in line.split("=", 1))
            kw[key] = val
        kw.update({k: v for k, v in overrides.items() if v is not None})
        if "experiment" not in kw:
            raise ConfigError("experiment", "missing")
        exp = kw.pop("experiment")
        parsed = {}
        for key, val in kw.items():
            if key not in _PARSERS:
                raise ConfigError(key, "unknown field")
            try:
                parsed[key] = _PARSERS[key](val) if isinstance(val, str) else val
            except (TypeError, ValueError) as exc:
                raise ConfigError(key, str(exc)) from None
        return cls.for_experiment(exp, **parsed)

    def canonical(self) -> str:
        return dataclasses.replace(self, output=None).to_text()

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _opt_float(s):
    return None if s == "" else float(s)


def _int(s):
    return int(float(s)) if "e" in s.lower() else int(s)


_PARSERS = {
    "alpha": float,
    "beta_or_r": float,
    "n": _int,
    "k": _int,
    "replicates": _int,
    "cap": _int,
    "thresholds": _floats,
    "gof_thresholds": _floats,
    "master_seed": _int,
    "surrogate_switch": float,
    "displacement": str,
    "stop": str,
    "delta": float,
    "s": _floats,
    "a": float,
    "h": str,
    "grid_step": float,
    "tol": _opt_float,
    "output": lambda s: s or None,
}

_HEAVY = dict(alpha=0.8, beta_or_r=1.0, n=4, k=2, cap=10**7, replicates=2300, displacement="pareto")
_LIGHT = dict(alpha=0.8, n=30, k=1, cap=10**7, replicates=500, displacement="gaussian", stop="max_under_cap")

DEFAULTS = {
    "gw_convergence": dict(alpha=0.5, n=25, replicates=1000),
    "mass_concentration": dict(alpha=0.5, n=25, replicates=500, s=(1.0, 2.0)),
    "heavy_point_process": _HEAVY,
    "frechet_max": _HEAVY,
    "cloud_speed_heavy": _HEAVY,
    "light_tail_ratio": _LIGHT,
    "cloud_speed_light": _LIGHT,
    "lemma_order_stats": dict(n=24, delta=0.5, replicates=50, displacement="weibull", beta_or_r=1.0),
    "lemma_heavy_sums": dict(alpha=0.5, n=10**6, replicates=100),
    "lemma_regvar_sum": dict(beta_or_r=1.0, a=0.5, n=200, h="power", replicates=1),
    "constants_table": dict(alpha=0.5, beta_or_r=2.0, k=10, replicates=1),
}


def make_displacement(cfg: ExperimentConfig):
    if cfg.displacement == "pareto":
        return Pareto(cfg.beta_or_r)
    if cfg.displacement == "gaussian":
        return Gaussian()
    if cfg.displacement == "exponential":
        return Exponential(1.0)
    return Weibull(cfg.beta_or_r, 1.0)


# ---------------------------------------------------------------------------
# per-replicate work (top-level functions so worker processes can pickle them)


def _row(index, **kw):
    row = {c: None for c in CSV_COLUMNS}
    row.update(replicate=index, truncated=False)
    row.update(kw)
    return row


def _rep_surrogate(cfg, scale, index):
    rng = replicate_rng(cfg.master_seed, index)
    path = simulate_surrogate_sizes(ProgenyLaw(cfg.alpha), cfg.n, cfg.surrogate_switch, rng, scale=scale)
    w = estimate_w(path)
    row = _row(index, z_n_log=float(path.log_sizes[-1]), w_hat=w.value,
               increment=float(w.increments[-1]), switch_generation=path.switch_generation)
    if cfg.experiment == "mass_concentration":
        vals = [mass_concentration_stat(path, s) for s in cfg.s]
        row["mass"] = vals
        row["ratio"] = vals[0]
    else:
        row["ratio"] = float(w.increments[-1] / w.value)
    return row


def _rep_heavy(cfg, index):
    rng = replicate_rng(cfg.master_seed, index)
    disp = make_displacement(cfg)
    res = run_brw(ProgenyLaw(cfg.alpha), disp, cfg.n, cfg.k, cfg.thresholds, cfg.cap, rng, stop="fixed")
    if res.truncated:
        return _row(index, truncated=True, usable=False, z_n_log=float(res.path.log_sizes[-1]))
    rec = res.record
    w = estimate_w(res.path)
    row = _row(index, z_n_log=float(res.path.log_sizes[-1]), w_hat=w.value, m_n=rec.m_n,
               usable=rec.z_n >= 2, speed=cloud_speed_stat(rec, "heavy"))
    if rec.z_n >= 2:
        scaled = scale_positions(rec, disp)
        row.update(
            ratio=float(scaled[0]),
            scaled_top=[float(v) for v in scaled],
            counts=[int(v) for v in res.points.counts],
            last_counts=[int(v) for v in res.points.last_step_counts],
            last_scaled_top=[float(v) / rec.c_n for v in res.extras["last_step_top"]],
        )
    return row


def _rep_light(cfg, index):
    rng = replicate_rng(cfg.master_seed, index)
    disp = make_displacement(cfg)
    res = run_brw(ProgenyLaw(cfg.alpha), disp, cfg.n, 1, (1.0,), cfg.cap, rng, stop=cfg.stop)
    rec = res.record
    if res.truncated:
        return _row(index, truncated=True, usable=False, z_n_log=float(res.path.log_sizes[-1]))
    w = estimate_w(res.path)
    row = _row(index, z_n_log=float(res.path.log_sizes[-1]), w_hat=w.value, m_n=rec.m_n,
               n_reached=rec.generation, usable=rec.z_n >= 2 and rec.generation >= 1,
               step_max_sum=res.extras.get("step_max_sum"))
    if row["usable"]:
        target = theory.light_tail_finite_target(cfg.alpha, disp.index, rec.generation)
        ratio = scaled_max_ratio(rec, disp)
        row.update(ratio=ratio, target=target, normalized=ratio / target,
                   speed=cloud_speed_stat(rec, "light"))
    return row


def order_stat_ratio(disp, n: int, delta: float, rng):
    """``G_(l):a / L(delta log a)`` with ``a = floor(2**n)`` and ``l = floor(a**(1 - delta))``.

    Returns ``(ratio, statistic, l, a)``; the l-th largest is found by partial selection.
    """
    if not 0.0 < delta <= 1.0:
        raise DomainError("delta must be in (0, 1]")
    a_n = int(math.floor(2.0**n))
    l_n = max(1, int(math.floor(a_n ** (1.0 - delta))))
    x = disp.sample(uniforms(rng, a_n))
    g = float(np.partition(x, a_n - l_n)[a_n - l_n])
    return g / float(disp.inverse_hazard(delta * math.log(a_n))), g, l_n, a_n


def _rep_order_stats(cfg, index):
    ratio, g, l_n, a_n = order_stat_ratio(make_displacement(cfg), cfg.n, cfg.delta,
                                          replicate_rng(cfg.master_seed, index))
    return _row(index, m_n=g, ratio=ratio, l_n=l_n, a_n=a_n)


def _rep_heavy_sums(cfg, index):
    rng = replicate_rng(cfg.master_seed, index)
    return _row(index, ratio=heavy_sum_log_ratio(ProgenyLaw(cfg.alpha), cfg.n, rng))


def map_replicates(fn, cfg: ExperimentConfig, threads: int = 1):
    idx = range(cfg.replicates)
    if threads <= 1:
        return [fn(cfg, i) for i in idx]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(functools.partial(fn, cfg), idx, chunksize=max(1, cfg.replicates // (4 * threads))))


# ---------------------------------------------------------------------------
# aggregation


PROVENANCE = {
    "w": "double-exponential growth: alpha^n log(Z_n + 1) -> W > 0 on survival",
    "mass": "last-generation mass: log(sum_{i<n} Z_i^s) / log Z_n -> s * alpha",
    "prm": "scaled extremes point process -> Poisson random measure, tau((x, inf]) = x^-beta",
    "frechet": "k-th scaled maximum -> P(Poisson(x^-beta) <= k - 1)",
    "speed_heavy": "heavy-tail cloud speed: (1/n) log+ log+ M_n -> -log alpha",
    "light": "light-tail maximum: M_n / L(log Z_n) -> (1 - alpha^(1/(r-1)))^(1/r - 1) or 1",
    "speed_light": "light-tail cloud speed: (1/n) log+ M_n -> -(log alpha) / r",
    "order": "order statistic G_{l_n(delta):a_n} / L(delta log a_n) -> 1",
    "heavy_sums": "heavy sums: log(sum_{i<=n} L_i) / log n -> 1/alpha",
    "regvar": "regularly varying geometric sums -> 1 / (1 - a^rho)",
    "constants": "lower/upper constant recursions and their closed forms",
}


def _check(name, statistic, target, tolerance, passed, provenance, gating=True, notes=""):
    return {
        "name": name,
        "statistic": float(statistic) if statistic is not None else None,
        "target": float(target) if target is not None else None,
        "tolerance": tolerance,
        "pass": bool(passed),
        "gating": gating,
        "provenance": provenance,
        "notes": notes,
    }


def _rel_check(name, statistic, target, tol, provenance, gating=True, notes=""):
    ok = abs(statistic - target) <= tol * abs(target)
    return _check(name, statistic, target, tol, ok, provenance, gating, notes)


def _median_notes(vals, level=0.95):
    if len(vals) < 20:
        return ""
    lo, hi = median_ci(vals, level)
    return f"median {level:.0%} CI [{lo:.6g}, {hi:.6g}]"


def _gof_check(name, rep, provenance, gating=True):
    if isinstance(rep, InsufficientDataError):
        return _check(name, None, None, None, False, provenance, gating, f"not evaluated: {rep}")
    d = _check(name, rep.statistic, None, rep.threshold, rep.passed, provenance, gating, rep.notes)
    d["gof"] = rep.as_dict()
    return d


def _attempt(fn, *args):
    try:
        return fn(*args)
    except InsufficientDataError as exc:
        return exc


def _agg_surrogate(cfg, rows):
    out = []
    w = np.array([r["w_hat"] for r in rows])
    if cfg.experiment == "gw_convergence":
        inc = np.array([r["increment"] for r in rows])
        out.append(_check("median_increment_vs_median_w", np.median(inc), 0.1 * np.median(w), 0.1,
                          np.median(inc) < 0.1 * np.median(w), PROVENANCE["w"],
                          notes=f"median W = {np.median(w):.6g}; {_median_notes(inc)}"))
        out.append(_check("all_w_positive", float(np.min(w)), 0.0, None, bool(np.all(w > 0)), PROVENANCE["w"]))
    else:
        for j, s in enumerate(cfg.s):
            vals = np.array([r["mass"][j] for r in rows])
            out.append(_rel_check(f"mass_concentration_s={s:g}", float(np.median(vals)), s * cfg.alpha,
                                  cfg.tol or 0.10, PROVENANCE["mass"], notes=_median_notes(vals)))
    return out


def _agg_heavy(cfg, rows):
    kept = [r for r in rows if r.get("usable")]
    beta = cfg.beta_or_r
    out = [_check("usable_replicates", len(kept), None, None, len(kept) > 0, "run bookkeeping",
                  notes=f"excluded {sum(1 for r in rows if not r['truncated'] and not r.get('usable'))} "
                        f"replicates with Z_n < 2")]
    if not kept:
        return out
    if cfg.experiment == "heavy_point_process":
        for key, tag, gating in (("counts", "", True), ("last_counts", "last_step_", False)):
            for j, x in enumerate(cfg.thresholds):
                counts = np.array([r[key][j] for r in kept])
                mu = x ** (-beta)
                out.append(_rel_check(f"{tag}mean_count_x={x:g}", counts.mean(), mu, cfg.tol or 0.10,
                                      PROVENANCE["prm"], gating,
                                      notes=poisson_mean_check(counts, mu).notes))
                if x in cfg.gof_thresholds:
                    rep = _attempt(poisson_gof, counts, mu, 0.01)
                    out.append(_gof_check(f"{tag}poisson_gof_x={x:g}", rep, PROVENANCE["prm"], gating))
    elif cfg.experiment == "frechet_max":
        for key, tag, gating in (("scaled_top", "", True), ("last_scaled_top", "last_step_", False)):
            for kk, thr in ((1, 0.05), (2, 0.07)):
                vals = [r[key][kk - 1] for r in kept if len(r[key]) >= kk]
                rep = _attempt(ks_report, vals, functools.partial(theory.frechet_kth_cdf, beta, kk), thr)
                out.append(_gof_check(f"{tag}ks_order_{kk}", rep, PROVENANCE["frechet"], gating))
    else:
        speeds = np.array([r["speed"] for r in kept])
        out.append(_rel_check("median_cloud_speed_heavy", float(np.median(speeds)),
                              theory.cloud_speed_heavy(cfg.alpha), cfg.tol or 0.25, PROVENANCE["speed_heavy"],
                              notes=_median_notes(speeds)))
    return out


def _agg_light(cfg, rows):
    disp = make_displacement(cfg)
    r_idx = disp.index
    kept = [r for r in rows if r.get("usable")]
    out = [_check("usable_replicates", len(kept), None, None, len(kept) > 0, "run bookkeeping",
                  notes=f"generations reached: {_histogram([r['n_reached'] for r in kept])}")]
    if not kept:
        return out
    if cfg.experiment == "light_tail_ratio":
        norm = np.array([r["normalized"] for r in kept])
        ratio = np.array([r["ratio"] for r in kept])
        tol = cfg.tol or (0.15 if r_idx > 1 else 0.20)
        out.append(_rel_check("median_ratio_over_finite_target", float(np.median(norm)), 1.0, tol,
                              PROVENANCE["light"],
                              notes=f"median raw ratio {np.median(ratio):.6g}; {_median_notes(norm)}"))
        if r_idx > 1:
            limit = theory.light_tail_constant(cfg.alpha, r_idx)
            for n in sorted({r["n_reached"] for r in kept if r["n_reached"] >= 7}):
                tgt = theory.light_tail_finite_target(cfg.alpha, r_idx, n)
                out.append(_rel_check(f"finite_target_vs_limit_n={n}", tgt, limit, 0.10, PROVENANCE["light"]))
        bound_ok = all(r["m_n"] <= r["step_max_sum"] + 1e-9 for r in kept if r["step_max_sum"] is not None)
        out.append(_check("max_below_sum_of_generation_maxima", None, None, None, bound_ok,
                          "preliminary upper bound: M_n <= sum_i max_v X_{e_v}", gating=False))
    else:
        speeds = np.array([r["speed"] for r in kept])
        out.append(_rel_check("median_cloud_speed_light", float(np.median(speeds)),
                              theory.cloud_speed_light(cfg.alpha, r_idx), cfg.tol or 0.25,
                              PROVENANCE["speed_light"], notes=_median_notes(speeds)))
    return out


def aggregate(cfg: ExperimentConfig, rows) -> list:
    """Aggregate checks for replicate ``rows`` (lets related experiments share runs)."""
    exp = cfg.experiment
    if exp in ("gw_convergence", "mass_concentration"):
        return _agg_surrogate(cfg, rows)
    if exp in ("heavy_point_process", "frechet_max", "cloud_speed_heavy"):
        return _agg_heavy(cfg, rows)
    if exp in ("light_tail_ratio", "cloud_speed_light"):
        return _agg_light(cfg, rows)
    if exp == "lemma_order_stats":
        return _agg_order_stats(cfg, rows)
    if exp == "lemma_heavy_sums":
        return _agg_heavy_sums(cfg, rows)
    raise ConfigError("experiment", f"{exp} has no replicate rows")


def _histogram(values):
    vals, counts = np.unique(np.asarray(values, dtype=int), return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


def _agg_order_stats(cfg, rows):
    ratio = np.array([r["ratio"] for r in rows])
    tol = cfg.tol or (0.10 if cfg.delta == 1.0 else 0.05)
    return [_rel_check("median_order_stat_ratio", float(np.median(ratio)), 1.0, tol, PROVENANCE["order"],
                       notes=_median_notes(ratio))]


def _agg_heavy_sums(cfg, rows):
    ratio = np.array([r["ratio"] for r in rows])
    return [_rel_check("median_log_sum_ratio", float(np.median(ratio)), 1.0 / cfg.alpha, cfg.tol or 0.10,
                       PROVENANCE["heavy_sums"], notes=_median_notes(ratio))]


def regvar_function(kind: str, rho: float):
    if kind == "power":
        return lambda x: x**rho
    return lambda x: x**rho * (1.0 + 1.0 / math.log(math.e + x))


def _run_regvar(cfg):
    h = regvar_function(cfg.h, cfg.beta_or_r)
    val = theory.regvar_geometric_sum(cfg.beta_or_r, cfg.a, h, cfg.n)
    target = theory.regvar_geometric_limit(cfg.beta_or_r, cfg.a)
    tol = cfg.tol or (1e-6 if cfg.h == "power" else 1e-2)
    rows = [_row(0, ratio=val)]
    agg = [_check("partial_sum_ratio", val, target, tol, abs(val - target) <= tol, PROVENANCE["regvar"])]
    return rows, agg


def _run_constants(cfg):
    a, r, k = cfg.alpha, cfg.beta_or_r, cfg.k
    fc = [theory.f_closed(a, r, j) for j in range(k + 1)]
    fr = theory.f_sequence(a, r, k)
    fo = [theory.f_bruteforce_oracle(a, r, j, cfg.grid_step) for j in range(min(k, 6) + 1)]
    ac = [theory.alpha_k_closed(a, r, j) for j in range(1, k + 1)]
    ar = [theory.alpha_k_recursive(a, r, j) for j in range(1, k + 1)]
    const = theory.light_tail_constant(a, r)
    rows = [_row(j, ratio=fc[j], f_closed=fc[j], f_recursive=fr[j],
                 alpha_k=ac[j - 1] if j >= 1 else None) for j in range(k + 1)]
    rel = lambda x, y: abs(x - y) / max(abs(x), abs(y))
    d_f = max(rel(x, y) for x, y in zip(fc, fr))
    d_a = max(rel(x, y) for x, y in zip(ac, ar))
    d_o = max(abs(x - y) for x, y in zip(fo, fc))
    agg = [
        _check("f_closed_vs_recursive", d_f, 0.0, 1e-12, d_f <= 1e-12, PROVENANCE["constants"]),
        _check("alpha_k_closed_vs_recursive", d_a, 0.0, 1e-12, d_a <= 1e-12, PROVENANCE["constants"]),
        _check("f_oracle_vs_closed", d_o, 0.0, 2 * cfg.grid_step, d_o <= 2 * cfg.grid_step,
               PROVENANCE["constants"]),
    ]
    extra = {"light_constant": const, "f_sequence": fc, "alpha_sequence": ac, "f_oracle": fo,
             "cloud_speed": theory.cloud_speed_light(a, r),
             "deterministic_limit_factor_w1": theory.deterministic_limit_factor(a, r, 1.0)}
    return rows, agg, extra


# ---------------------------------------------------------------------------


def run(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Execute one experiment and return its report (also written if ``cfg.output``)."""
    t0 = time.perf_counter()
    extra = {}
    targets = []
    exp = cfg.experiment
    if exp in ("gw_convergence", "mass_concentration"):
        scale = calibrate_stable_scale(ProgenyLaw(cfg.alpha), auxiliary_rng(cfg.master_seed, 0))
        extra["stable_scale"] = {"fitted": scale, "analytic": stable_scale_theory(cfg.alpha)}
        log.info("stable scale for alpha=%g: fitted %.6g, analytic %.6g", cfg.alpha, scale,
                 stable_scale_theory(cfg.alpha))
        rows = map_replicates(functools.partial(_rep_surrogate_entry, scale), cfg, threads)
        agg = _agg_surrogate(cfg, rows)
        if exp == "mass_concentration":
            targets = [{"name": f"s*alpha (s={s:g})", "value": s * cfg.alpha, "provenance": PROVENANCE["mass"]}
                       for s in cfg.s]
        else:
            targets = [{"name": "W > 0", "value": 0.0, "provenance": PROVENANCE["w"]}]
    elif exp in ("heavy_point_process", "frechet_max", "cloud_speed_heavy"):
        rows = map_replicates(_rep_heavy, cfg, threads)
        agg = _agg_heavy(cfg, rows)
        if exp == "heavy_point_process":
            targets = [{"name": f"tau((x, inf]) x={x:g}", "value": x ** (-cfg.beta_or_r),
                        "provenance": PROVENANCE["prm"]} for x in cfg.thresholds]
        elif exp == "frechet_max":
            targets = [{"name": "frechet_kth_cdf", "value": None, "provenance": PROVENANCE["frechet"]}]
        else:
            targets = [{"name": "-log alpha", "value": theory.cloud_speed_heavy(cfg.alpha),
                        "provenance": PROVENANCE["speed_heavy"]}]
    elif exp in ("light_tail_ratio", "cloud_speed_light"):
        rows = map_replicates(_rep_light, cfg, threads)
        agg = _agg_light(cfg, rows)
        r_idx = make_displacement(cfg).index
        if exp == "light_tail_ratio":
            targets = [{"name": "light_tail_constant", "value": theory.light_tail_constant(cfg.alpha, r_idx),
                        "provenance": PROVENANCE["light"]}]
        else:
            targets = [{"name": "-(log alpha)/r", "value": theory.cloud_speed_light(cfg.alpha, r_idx),
                        "provenance": PROVENANCE["speed_light"]}]
    elif exp == "lemma_order_stats":
        rows = map_replicates(_rep_order_stats, cfg, threads)
        agg = _agg_order_stats(cfg, rows)
        targets = [{"name": "ratio limit", "value": 1.0, "provenance": PROVENANCE["order"]}]
    elif exp == "lemma_heavy_sums":
        rows = map_replicates(_rep_heavy_sums, cfg, threads)
        agg = _agg_heavy_sums(cfg, rows)
        targets = [{"name": "1/alpha", "value": 1.0 / cfg.alpha, "provenance": PROVENANCE["heavy_sums"]}]
    elif exp == "lemma_regvar_sum":
        rows, agg = _run_regvar(cfg)
        targets = [{"name": "1/(1 - a^rho)", "value": theory.regvar_geometric_limit(cfg.beta_or_r, cfg.a),
                    "provenance": PROVENANCE["regvar"]}]
    else:
        rows, agg, extra = _run_constants(cfg)
        targets = [{"name": "light_tail_constant", "value": extra["light_constant"],
                    "provenance": PROVENANCE["constants"]}]

    truncation_count = sum(1 for r in rows if r.get("truncated"))
    if truncation_count * 2 > cfg.replicates:
        status = "inconclusive"
    elif all(c["pass"] for c in agg if c["gating"]):
        status = "pass"
    else:
        status = "fail"
    report = {
        "version": describe_version(),
        "experiment": exp,
        "config": _config_echo(cfg),
        "config_hash": cfg.digest(),
        "status": status,
        "replicates": cfg.replicates,
        "truncation_count": truncation_count,
        "theory_targets": targets,
        "aggregate": agg,
        "extra": extra,
        "rows": rows,
        "wall_time": time.perf_counter() - t0,
    }
    if cfg.output:
        write_report(report, cfg.output)
    return report


def _rep_surrogate_entry(scale, cfg, index):
    return _rep_surrogate(cfg, scale, index)


@functools.lru_cache(maxsize=1)
def describe_version() -> str:
    """``git describe``-style string, e.g. ``v0.1.0-0-g1a2b3c4-dirty``; plain ``v0.1.0`` outside git."""
    here = Path(__file__).resolve().parent

    def git(*args):
        return subprocess.run(["git", *args], cwd=here, capture_output=True, text=True, timeout=5,
                              check=True).stdout.strip()

    try:
        return git("describe", "--tags", "--long", "--dirty")
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        short = git("rev-parse", "--short", "HEAD")
        dirty = "-dirty" if git("status", "--porcelain", "--untracked-files=no") else ""
        return f"v{__version__}-0-g{short}{dirty}"
    except (OSError, subprocess.SubprocessError):
        return f"v{__version__}"


def _config_echo(cfg):
    d = dataclasses.asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def exit_code(report: dict) -> int:
    return {"pass": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[report["status"]]


def report_json(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in report["rows"]:
        w.writerow(["" if row.get(c) is None else _fmt(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report(report: dict, path) -> tuple[Path, Path]:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_path = path.with_suffix(".csv")
    path.write_text(report_json(report))
    csv_path.write_text(report_csv(report))
    return path, csv_path
