"""Counter-based, splittable random streams for reproducible experiments.

Every stochastic entry point in the package accepts either an integer
seed, a ready ``numpy.random.Generator``, or ``None`` (fresh OS entropy).
Streams are built on Philox so that independent substreams for replicas
and grid cells can be derived from a root seed without correlation.
"""

from __future__ import annotations

import numpy as np


def philox_stream(seed=None, *path: int) -> np.random.Generator:
    """Generator on a Philox stream derived from ``seed`` and a spawn path."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Normalize ``rng``: pass generator-likes through, seed ints, None is fresh."""
    if isinstance(rng, np.random.Generator) or (hasattr(rng, "random") and hasattr(rng, "integers")):
        return rng
    if rng is None:
        return philox_stream(None)
    return philox_stream(int(rng))


def replica_streams(seed, count: int) -> list[np.random.Generator]:
    """Independent per-replica streams derived from (seed, replica index)."""
    return [philox_stream(seed, i) for i in range(count)]
