"""Pinned random number generation.

Every sampler takes ``seed`` which may be an int or an existing
``numpy.random.Generator``. Integers are expanded through ``SeedSequence``
into a ``PCG64`` generator (128-bit state). For a fixed numpy version the
same seed yields the same stream, hence the same output bytes.
"""
from __future__ import annotations

import numpy as np

Seed = "int | np.random.Generator"


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def block_seeds(seed: int, blocks: int) -> list[np.random.SeedSequence]:
    """Independent child seeds, one per fixed-size work block."""
    return np.random.SeedSequence(seed).spawn(blocks)
