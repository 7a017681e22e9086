"""Seeded counter-based random streams.

Each :class:`Rng` wraps a Philox generator keyed by ``(seed, stream)``, so the
draw sequence depends only on those two integers and not on the platform or
on how many other streams were consumed.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class Rng:
    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        bitgen = np.random.Philox(key=np.array([self.seed, self.stream],
                                               dtype=np.uint64))
        self._gen = np.random.Generator(bitgen)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream})"

    def child(self, stream: int) -> "Rng":
        """Independent stream sharing this seed."""
        return Rng(self.seed, stream)

    def uniform(self, low, high, shape, dtype=np.float64):
        return self._gen.uniform(low, high, size=shape).astype(dtype)

    def normal(self, shape, scale=1.0, dtype=np.float64):
        return (self._gen.standard_normal(size=shape) * scale).astype(dtype)

    def integers(self, low, high, shape=None):
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n):
        return self._gen.permutation(n)
