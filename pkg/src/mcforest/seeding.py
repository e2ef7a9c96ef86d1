"""Deterministic derivation of independent random streams.

Every source of randomness in the package flows through a single master
seed plus a path of sub-stream keys (strings or integers), so any unit of
work (a tree, a replication, a study cell) is reproducible in isolation
and independent of scheduling or parallelism.
"""

from __future__ import annotations

import hashlib

import numpy as np

_INT_TAG = 0
_STR_TAG = 1


def _key_words(key) -> tuple[int, ...]:
    """Encode one path component as tagged 32-bit words (injective)."""
    if isinstance(key, (bool, float)):
        raise TypeError(f"stream key must be int or str, got {type(key).__name__}")
    if isinstance(key, (int, np.integer)):
        k = int(key)
        if k < 0:
            raise ValueError("stream keys must be nonnegative")
        return (_INT_TAG, k & 0xFFFFFFFF, (k >> 32) & 0xFFFFFFFF)
    if isinstance(key, str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        words = tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
        return (_STR_TAG, *words)
    raise TypeError(f"stream key must be int or str, got {type(key).__name__}")


def seed_sequence(master_seed: int, *path) -> np.random.SeedSequence:
    """SeedSequence for the sub-stream addressed by ``path`` under ``master_seed``."""
    words: list[int] = []
    for key in path:
        words.extend(_key_words(key))
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(words))


def rng_for(master_seed: int, *path) -> np.random.Generator:
    """Generator on the sub-stream addressed by ``path``."""
    return np.random.default_rng(seed_sequence(master_seed, *path))


def derive_seed(master_seed: int, *path) -> int:
    """Collapse a sub-stream address into a single 64-bit child seed."""
    return int(seed_sequence(master_seed, *path).generate_state(1, np.uint64)[0])
