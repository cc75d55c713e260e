"""Per-sample random streams.

Every random draw in an ensemble comes from a Philox generator keyed by
``(seed, stream, sample_index)``, so a sample's randomness never depends on
how samples are distributed over workers.
"""
from __future__ import annotations

import numpy as np

DRIVING = 0
REMAINDER = 1
FRESH = 2
DIRECT = 3
OU = 4
BRIDGE = 5
CONFINED = 6
SCENARIO = 7


def sample_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return sample_rng(int(seed_or_rng), DRIVING, 0)
