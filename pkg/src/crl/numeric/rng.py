"""Seeded, counter-based random streams.

Every random draw in the package comes from ``stream(seed, purpose, *index)``.
A stream is a Philox generator keyed by a SeedSequence over the global seed,
a stable hash of the purpose string, and integer indices, so the draws for
episode 731 do not depend on how many other episodes ran before it.
"""
import zlib

import numpy as np


def _purpose_key(purpose):
    if isinstance(purpose, str):
        return zlib.crc32(purpose.encode("utf-8"))
    return int(purpose)


def stream(seed, purpose, *index):
    keys = (_purpose_key(purpose),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=keys)
    return np.random.Generator(np.random.Philox(ss))


class SeededRng:
    """Factory for the streams of one experiment seed."""

    def __init__(self, seed):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def __call__(self, purpose, *index):
        return stream(self.seed, purpose, *index)

    def __repr__(self):
        return f"SeededRng({self.seed})"
