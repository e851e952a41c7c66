"""Branching random walks on infinite-mean Galton-Watson trees."""
from . import brw, distributions, population, stats, theory
from .distributions import Exponential, Gaussian, Pareto, ProgenyLaw, Weibull

__version__ = "0.1.0"

__all__ = [
    "brw",
    "distributions",
    "population",
    "stats",
    "theory",
    "Exponential",
    "Gaussian",
    "Pareto",
    "ProgenyLaw",
    "Weibull",
    "__version__",
]
