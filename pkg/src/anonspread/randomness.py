"""Seeded randomness with derivable substreams.

Every stochastic component draws from a RandomSource. Substreams are
derived by mixing the parent seed with integer keys, so trial i of an
experiment (or node i of a lazy tree) always sees the same stream no
matter how many workers run or in which order streams are created.
"""

from __future__ import annotations

import random
from fractions import Fraction

_MASK64 = (1 << 64) - 1


def mix_seed(seed: int, *keys: int) -> int:
    """Derive a child seed from a parent seed and integer keys.

    splitmix64-style finalizer; cheap and well spread, which is all we
    need for decorrelating substreams.
    """
    z = seed & _MASK64
    for k in keys:
        z = (z + 0x9E3779B97F4A7C15 + (k & _MASK64)) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z = z ^ (z >> 31)
    return z


class RandomSource:
    """Thin wrapper over random.Random with the choice interface the
    protocols use.

    The same interface is implemented by the oracle's branch enumerator,
    which is why protocols never touch random.Random directly. `exact`
    tells the caller whether probabilities should be handed over as
    Fractions (enumeration) or may be collapsed to floats (simulation).
    """

    exact = False

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(seed)

    def spawn(self, *keys: int) -> "RandomSource":
        return RandomSource(mix_seed(self.seed, *keys))

    def bernoulli(self, p) -> bool:
        return self._rng.random() < p

    def choice(self, options):
        """Uniform choice. Callers pass options in a deterministic order."""
        return options[self._rng.randrange(len(options))]

    def subset(self, options, k: int):
        """Uniform k-subset, order-normalized."""
        if k >= len(options):
            return list(options)
        return sorted(self._rng.sample(list(options), k))

    def random(self) -> float:
        return self._rng.random()


def as_probability(p) -> float:
    if isinstance(p, Fraction):
        return float(p)
    return p
