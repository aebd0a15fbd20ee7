"""Tests for dense linear algebra helpers."""

import numpy as np
import pytest

from src.rgn import InvalidInputError
from src.rgn.cpd_model import jacobian
from src.rgn.experiments import make_pencil
from src.rgn.linalg import (
    compact_svd,
    orthonormal_complement,
    pinv_from_factors,
    pinv_apply,
    smallest_singular_value,
    spectral_norm,
)


class TestCompactSvd:
    """Test the compact SVD wrapper."""

    def test_identity(self):
        """Identity factors into identities."""
        f = compact_svd(np.eye(3))
        np.testing.assert_allclose(f.singular_values, [1.0, 1.0, 1.0])
        np.testing.assert_allclose(np.abs(f.left), np.eye(3), atol=1e-15)
        np.testing.assert_allclose(f.left @ np.diag(f.singular_values) @ f.right.T, np.eye(3), atol=1e-15)

    def test_diagonal_ordering(self):
        """Singular values come out nonincreasing."""
        f = compact_svd(np.diag([1.0, 3.0, 2.0]))
        np.testing.assert_allclose(f.singular_values, [3.0, 2.0, 1.0])

    def test_reconstruction_tall(self):
        """A tall matrix is reconstructed from its compact factors."""
        a = np.random.default_rng(0).normal(size=(7, 4))
        f = compact_svd(a)
        assert f.left.shape == (7, 4)
        assert f.right.shape == (4, 4)
        np.testing.assert_allclose(f.left @ np.diag(f.singular_values) @ f.right.T, a, atol=1e-13)

    def test_eigenvalues_of_gram(self):
        """Squared singular values are the eigenvalues of A^T A."""
        a = np.random.default_rng(5).normal(size=(8, 5))
        eigenvalues = np.sort(np.linalg.eigvalsh(a.T @ a))[::-1]
        np.testing.assert_allclose(compact_svd(a).singular_values ** 2, eigenvalues, rtol=1e-10)

    def test_non_finite_rejected(self):
        """NaN entries raise an input error."""
        with pytest.raises(InvalidInputError):
            compact_svd(np.array([[1.0, np.nan], [0.0, 1.0]]))

    def test_numerical_rank(self):
        """A rank-1 outer product has numerical rank 1."""
        a = np.outer([1.0, 2.0, 3.0], [1.0, -1.0])
        assert compact_svd(a).numerical_rank() == 1


class TestPinvApply:
    """Test minimal-norm least-squares solves."""

    def test_identity(self):
        """Solving with the identity returns the right-hand side."""
        np.testing.assert_allclose(pinv_apply(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_zero_matrix(self):
        """The zero matrix gives the zero (minimal-norm) solution."""
        np.testing.assert_array_equal(pinv_apply(np.zeros((3, 2)), [1.0, 2.0, 3.0]), np.zeros(2))

    def test_dimension_mismatch(self):
        """A right-hand side of the wrong length is rejected."""
        with pytest.raises(InvalidInputError):
            pinv_apply(np.eye(3), [1.0, 2.0])

    def test_normal_equations(self):
        """For full column rank the solution satisfies the normal equations."""
        rng = np.random.default_rng(1)
        a = rng.normal(size=(6, 4))
        b = rng.normal(size=6)
        np.testing.assert_allclose(pinv_apply(a, b), np.linalg.solve(a.T @ a, a.T @ b), rtol=1e-10)

    def test_pinv_matches_numpy(self):
        """Full pseudoinverse agrees with numpy's."""
        a = np.random.default_rng(2).normal(size=(5, 3))
        np.testing.assert_allclose(pinv_from_factors(compact_svd(a)), np.linalg.pinv(a), atol=1e-12)


class TestSingularValues:
    """Test smallest singular value and spectral norm."""

    def test_identity(self):
        """Identity has smallest singular value 1."""
        assert smallest_singular_value(np.eye(3)) == pytest.approx(1.0)

    def test_diagonal(self):
        """diag(3,2,1) has smallest singular value 1."""
        assert smallest_singular_value(np.diag([3.0, 2.0, 1.0])) == pytest.approx(1.0)

    def test_orthogonal_terracini(self):
        """The 27 x 14 Terracini matrix of the orthogonal pencil point has sigma_min 1."""
        j = jacobian(make_pencil(0).point)
        assert j.shape == (27, 14)
        assert smallest_singular_value(j) == pytest.approx(1.0, abs=1e-14)

    def test_wide_rejected(self):
        """More columns than rows is a contract violation."""
        with pytest.raises(InvalidInputError):
            smallest_singular_value(np.ones((2, 3)))

    def test_spectral_norm(self):
        """Spectral norm of a diagonal matrix is its largest entry."""
        assert spectral_norm(np.diag([3.0, -5.0, 1.0])) == pytest.approx(5.0)
        assert spectral_norm(np.zeros((3, 3))) == 0.0


class TestOrthonormalComplement:
    """Test Householder complements."""

    def test_first_basis_vector(self):
        """The complement of e1 spans e2, e3."""
        v = np.array([1.0, 0.0, 0.0])
        q = orthonormal_complement(v)
        assert q.shape == (3, 2)
        np.testing.assert_allclose(q.T @ v, 0.0, atol=1e-15)
        np.testing.assert_allclose(q.T @ q, np.eye(2), atol=1e-15)
        np.testing.assert_allclose(q[0], 0.0, atol=1e-15)

    def test_two_dimensional(self):
        """The complement of (1,1)/sqrt2 is +-(1,-1)/sqrt2."""
        q = orthonormal_complement(np.array([1.0, 1.0]) / np.sqrt(2.0))
        assert q.shape == (2, 1)
        np.testing.assert_allclose(np.abs(q[:, 0]), [1 / np.sqrt(2.0)] * 2, atol=1e-15)
        assert q[0, 0] * q[1, 0] < 0

    def test_random_vector(self):
        """Complements of random vectors are orthonormal and orthogonal to v."""
        rng = np.random.default_rng(3)
        for _ in range(10):
            v = rng.normal(size=5)
            q = orthonormal_complement(v)
            np.testing.assert_allclose(q.T @ v, 0.0, atol=1e-13)
            np.testing.assert_allclose(q.T @ q, np.eye(4), atol=1e-13)

    def test_deterministic(self):
        """Same input gives the same basis."""
        v = np.array([0.3, -1.2, 2.0])
        np.testing.assert_array_equal(orthonormal_complement(v), orthonormal_complement(v))

    def test_zero_vector(self):
        """The zero vector has no complement basis."""
        with pytest.raises(InvalidInputError):
            orthonormal_complement(np.zeros(3))

    def test_determinant_unit(self):
        """[v/|v| | complement] is orthogonal with determinant +-1."""
        rng = np.random.default_rng(4)
        for n in (2, 3, 6):
            v = rng.normal(size=n)
            full = np.column_stack([v / np.linalg.norm(v), orthonormal_complement(v)])
            assert abs(np.linalg.det(full)) == pytest.approx(1.0, abs=1e-12)
