"""Seed derivation for independent, purpose-specific random streams."""

from __future__ import annotations

import hashlib

import numpy as np

# Fixed purpose ids; appending new ones never disturbs existing streams.
PURPOSES = {
    "data": 0,
    "noise": 1,
    "init": 2,
    "shuffle": 3,
    "sigma": 4,
    "restart": 5,
    "instance": 6,
}


def _key_words(key) -> list[int]:
    digest = hashlib.sha256(repr(key).encode()).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def stream(seed: int, purpose: str, *key) -> np.random.Generator:
    """Counter-based generator for ``(seed, purpose, *key)``.

    Drawing row-major arrays from a stream is prefix-stable: asking for more
    rows extends the earlier draw instead of reshuffling it.
    """
    words = [int(seed) & 0xFFFFFFFF, int(seed) >> 32 & 0xFFFFFFFF, PURPOSES[purpose]]
    if key:
        words.extend(_key_words(key))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def derive_seed(seed: int, *key) -> int:
    """Child seed that depends only on ``seed`` and the cell ``key``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *_key_words(key)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
