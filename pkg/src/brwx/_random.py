"""Random stream helpers.

Every sampler in the package is a pure function of explicit uniforms. The
helpers here turn a :class:`numpy.random.Generator` into open-interval
uniforms and derive per-replicate streams from a master seed.
"""
from __future__ import annotations

import numpy as np

_MANTISSA = 2**52
_SCALE = 2.0**-52


def uniforms(rng: np.random.Generator, size: int | None = None):
    """Uniform draws on the open interval (0, 1).

    Each value consumes exactly one 64-bit word of the stream, so a block of
    ``size`` draws equals ``size`` single draws taken in order.
    """
    k = rng.integers(0, _MANTISSA, size=size, dtype=np.int64)
    return (k + 0.5) * _SCALE


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index``.

    The stream depends only on (master_seed, index), never on scheduling.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(0, int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def auxiliary_rng(master_seed: int, tag: int) -> np.random.Generator:
    """Stream for coordinator-side work (calibration); disjoint from replicates."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(1, int(tag)))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
