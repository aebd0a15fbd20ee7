"""Seeded, platform-independent Gaussian sampling."""

from typing import Optional, Tuple

import numpy as np


class GaussianStream:
    """
    Standard normal samples from PCG64 uniforms via the Marsaglia polar method.

    The polar transform only needs uniform doubles, which PCG64 produces
    identically on every platform, so a (seed, key) pair always yields the
    same samples.
    """

    def __init__(self, seed: int, *key: int):
        entropy = [int(seed)] + [int(k) for k in key]
        self.seed_sequence = np.random.SeedSequence(entropy)
        self.generator = np.random.Generator(np.random.PCG64(self.seed_sequence))
        self._spare: Optional[float] = None

    def uniform(self) -> float:
        return float(self.generator.random())

    def _pair(self) -> Tuple[float, float]:
        while True:
            u = 2.0 * self.uniform() - 1.0
            v = 2.0 * self.uniform() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                factor = np.sqrt(-2.0 * np.log(s) / s)
                return u * factor, v * factor

    def standard_normal(self) -> float:
        if self._spare is not None:
            value, self._spare = self._spare, None
            return value
        first, self._spare = self._pair()
        return first

    def normal(self, size: int) -> np.ndarray:
        return np.array([self.standard_normal() for _ in range(size)])

    def unit_vector(self, size: int) -> np.ndarray:
        """Gaussian vector normalized to unit length."""
        vec = self.normal(size)
        return vec / np.linalg.norm(vec)
