"""Deterministic, splittable pseudo-random streams.

Draw ``i`` of a stream with seed ``s`` is ``mix64(s + (i+1)*GOLDEN)`` -- a
counter-based SplitMix64. Because draws are pure functions of (seed, index),
results are reproducible across platforms and independent of chunking.
Substreams are derived by XOR-mixing a key hash into the seed, so per-clip
noise does not depend on corpus order.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)

_U64_MASK = (1 << 64) - 1


def mix64(z: np.ndarray | int) -> np.ndarray:
    """SplitMix64 finalizer; accepts scalars or uint64 arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def hash_key(text: str) -> int:
    """FNV-1a 64-bit hash, used to derive substream keys from clip ids."""
    h = int(_FNV_OFFSET)
    for b in text.encode("utf-8"):
        h = ((h ^ b) * int(_FNV_PRIME)) & _U64_MASK
    return h


class RandomStream:
    """A seeded stream of deterministic draws with derived substreams."""

    def __init__(self, seed: int):
        self.seed = np.uint64(seed & _U64_MASK)
        self._counter = 0

    def substream(self, key: int | str) -> "RandomStream":
        """Independent stream keyed off this one; order of creation is irrelevant."""
        if isinstance(key, str):
            key = hash_key(key)
        mixed = mix64(self.seed ^ np.uint64(key & _U64_MASK))
        return RandomStream(int(mixed))

    def bits(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit words."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return mix64(self.seed + idx * _GOLDEN)

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """``n`` doubles in [low, high) with 53-bit resolution."""
        u = (self.bits(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return low + (high - low) * u

    def normal(self, n: int, std: float = 1.0) -> np.ndarray:
        """``n`` Gaussian draws via Box-Muller."""
        m = (n + 1) // 2
        u1 = (self.bits(m).astype(np.float64) + 1.0) * 2.0 ** -64  # (0, 1]
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return std * z[:n]

    def integers(self, n: int, low: int, high: int) -> np.ndarray:
        """``n`` ints uniform in [low, high)."""
        return (low + np.floor(self.uniform(n) * (high - low))).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n)."""
        return np.argsort(self.uniform(n), kind="stable")
