"""Seeded random streams.

One integer seed feeds every stochastic choice in a run.  Each purpose
(tree shape, robot placement, GP operators, ...) gets its own stream
derived from ``(seed, *key)`` so that changing one knob never shifts the
draws of an unrelated one.
"""
from __future__ import annotations

import random
import secrets

from numpy.random import SeedSequence

# stream purposes; values are part of the reproducibility contract
TREE = 1
PLACEMENT = 2
GP = 3
TEST_TREE = 4
TEST_PLACEMENT = 5
TRIAL_SEED_DEPTH = 6


def derive_seed(seed: int, *key: int) -> int:
    """Return a 64-bit integer seed for the sub-stream ``key`` of ``seed``."""
    ss = SeedSequence(entropy=int(seed) & ((1 << 128) - 1), spawn_key=tuple(int(k) for k in key))
    lo, hi = ss.generate_state(2, dtype="uint32")
    return int(lo) | (int(hi) << 32)


def substream(seed: int, *key: int) -> random.Random:
    return random.Random(derive_seed(seed, *key))


def fresh_seed() -> int:
    return secrets.randbits(63)
