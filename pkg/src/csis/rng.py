"""Seeded random streams.

Every stream is a Philox-4x64 counter-based generator keyed by a
``SeedSequence(master_seed, spawn_key=...)``. Child keys are plain tuples of
integers (strings are hashed to stable integers first), so the stream for,
say, replication 17 does not depend on how many other replications exist or
on which worker draws it.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be non-negative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def make_rng(seed: int, *key) -> np.random.Generator:
    """Independent generator for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_part(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *key) -> int:
    """A non-negative 63-bit integer seed for the sub-stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_part(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
