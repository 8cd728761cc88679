"""Seeded random number generation with deterministic substreams."""
from __future__ import annotations

import numpy as np

_FORK_MOD = 2**63


class SeededRng:
    """Deterministic RNG: same seed and same call sequence give the same draws.

    ``fork(tag)`` derives an independent substream from the parent seed and a
    string tag, so separate phases (weight init, exploration noise, sampling)
    stay reproducible even when one phase changes how many draws it makes.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.default_rng(self.seed)

    def fork(self, tag: str) -> "SeededRng":
        # Stable across runs and machines: hash the tag with FNV-1a, mix with seed.
        h = 0xCBF29CE484222325
        for b in tag.encode("utf-8"):
            h = ((h ^ b) * 0x100000001B3) % 2**64
        return SeededRng((self.seed * 0x9E3779B97F4A7C15 + h) % _FORK_MOD)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size)

    def random(self, size=None):
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, seq, size=None, replace=True):
        return self._gen.choice(seq, size=size, replace=replace)

    def state(self) -> dict:
        return self._gen.bit_generator.state

    def set_state(self, state: dict) -> None:
        self._gen.bit_generator.state = state
