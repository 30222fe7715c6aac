"""Deterministic xorshift64* generator.

Sampling contracts elsewhere in the package promise bit-identical output
for a given seed on every platform, which rules out library generators
whose stream is an implementation detail.  The generator here is the
classic xorshift64* with a splitmix64 seed scrambler; uniform doubles take
the top 53 bits of each word.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_STAR = 0x2545F4914F6CDD1D


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, stream: int) -> int:
    """Decorrelated sub-stream seed (validation samples, selection draws, ...)."""
    return splitmix64(splitmix64(seed & _MASK) ^ splitmix64((stream + 1) & _MASK))


class XorShift64Star:
    """xorshift64* stream; state is never zero thanks to the seed scrambler."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        state = splitmix64(seed & _MASK)
        self._state = state if state != 0 else 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * _STAR) & _MASK

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def point(self, box) -> np.ndarray:
        """One point uniform per coordinate inside ``box`` (list of (lo, hi))."""
        return np.array([self.uniform_in(lo, hi) for lo, hi in box])

    def unit_vector(self, dim: int) -> np.ndarray:
        """Random direction with unit Euclidean norm (components from [-1, 1))."""
        while True:
            v = np.array([self.uniform_in(-1.0, 1.0) for _ in range(dim)])
            norm = float(np.linalg.norm(v))
            if norm > 1e-6:
                return v / norm
