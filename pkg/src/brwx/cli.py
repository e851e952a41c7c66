"""Command-line entry point: ``brwx <experiment> [flags]``.

Settings are layered: experiment defaults, then ``--config FILE`` (flat
``key = value`` lines), then explicit flags. Reports go to ``--out`` or, if
absent, to ``$BRWX_OUTPUT_DIR/<experiment>.json`` (default ``./brwx-out``).
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .errors import DomainError
from .experiments import (
    EXIT_USAGE,
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    exit_code,
    run,
)

OUTPUT_ENV = "BRWX_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that code means "inconclusive" here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="brwx", description="Run a branching random walk verification experiment.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path, help="flat key = value file")
    p.add_argument("--alpha", type=float)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--beta", type=float, dest="beta_or_r", help="Pareto tail index")
    g.add_argument("--r", type=float, dest="beta_or_r", help="hazard index of the lighter tail")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--out", dest="output")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--surrogate-switch", type=float, dest="surrogate_switch",
                   help="log population size at which the surrogate takes over")
    p.add_argument("--thresholds", help="comma-separated scaled thresholds")
    p.add_argument("--gof-thresholds", dest="gof_thresholds")
    p.add_argument("--displacement", choices=("pareto", "gaussian", "exponential", "weibull"))
    p.add_argument("--stop", choices=("fixed", "max_under_cap"))
    p.add_argument("--delta", type=float)
    p.add_argument("--s", help="comma-separated exponents for mass_concentration")
    p.add_argument("--a", type=float)
    p.add_argument("--h", choices=("power", "power_log"))
    p.add_argument("--grid-step", type=float, dest="grid_step")
    p.add_argument("--tol", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_TUPLES = ("thresholds", "gof_thresholds", "s")
_KEYS = ("alpha", "beta_or_r", "n", "k", "replicates", "cap", "master_seed", "output", "surrogate_switch",
         "displacement", "stop", "delta", "a", "h", "grid_step", "tol") + _TUPLES


def config_from_args(ns) -> ExperimentConfig:
    over = {}
    for key in _KEYS:
        v = getattr(ns, key)
        if v is None:
            continue
        if key in _TUPLES:
            try:
                v = tuple(float(x) for x in v.split(",") if x.strip())
            except ValueError:
                raise ConfigError(key, f"not a list of numbers: {v!r}") from None
        over[key] = v
    if ns.config is not None:
        text = ns.config.read_text()
        cfg = ExperimentConfig.from_text(text, experiment=ns.experiment, **over)
    else:
        cfg = ExperimentConfig.for_experiment(ns.experiment, **over)
    if cfg.output is None:
        root = Path(os.environ.get(OUTPUT_ENV, "brwx-out"))
        cfg = dataclasses.replace(cfg, output=str(root / f"{cfg.experiment}.json"))
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(ns)
        if ns.threads < 1:
            raise ConfigError("threads", "must be >= 1")
    except (ConfigError, OSError) as exc:
        print(f"brwx: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = run(cfg, threads=ns.threads)
    except DomainError as exc:
        print(f"brwx: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for c in report["aggregate"]:
        mark = "ok  " if c["pass"] else ("FAIL" if c["gating"] else "diag")
        print(f"{mark} {c['name']}: {c['statistic']} (target {c['target']})")
    print(f"status={report['status']} truncated={report['truncation_count']}/{cfg.replicates} -> {cfg.output}")
    return exit_code(report)


if __name__ == "__main__":
    sys.exit(main())
