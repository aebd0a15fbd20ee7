"""Tests for the seeded Gaussian stream."""

import numpy as np
import pytest

from src.utils.random import GaussianStream


class TestGaussianStream:
    """Test reproducibility and basic statistics."""

    def test_same_seed_same_samples(self):
        """A (seed, key) pair always yields the same samples."""
        a = GaussianStream(123, 4).normal(50)
        b = GaussianStream(123, 4).normal(50)
        np.testing.assert_array_equal(a, b)

    def test_keys_separate_streams(self):
        """Different keys give different samples."""
        a = GaussianStream(123, 0).normal(10)
        b = GaussianStream(123, 1).normal(10)
        assert not np.array_equal(a, b)

    def test_large_seed(self):
        """Unsigned 64-bit seeds are accepted."""
        assert np.isfinite(GaussianStream(2**64 - 1).standard_normal())

    def test_moments(self):
        """Samples look standard normal."""
        x = GaussianStream(7).normal(20000)
        assert abs(x.mean()) < 0.05
        assert x.std() == pytest.approx(1.0, abs=0.05)

    def test_unit_vector(self):
        """unit_vector returns unit norm."""
        v = GaussianStream(8).unit_vector(14)
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert v.shape == (14,)

    def test_uniform_range(self):
        """Uniforms lie in [0, 1)."""
        stream = GaussianStream(9)
        values = [stream.uniform() for _ in range(1000)]
        assert min(values) >= 0.0
        assert max(values) < 1.0
