"""Tests for rank-1 points, tangent bases and the HOOI retraction."""

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from src.rgn import InvalidInputError, RetractionError, SingularStepError
from src.rgn.checks import random_point
from src.rgn.diagnostics import fit_loglog_slope, random_unit_tangent
from src.rgn.experiments import make_pencil
from src.rgn.manifold import (
    ProductPoint,
    RankOnePoint,
    canonical_factors,
    product_tangent_basis,
    project_ambient_to_tangent,
    rank_one_hooi,
    retract,
    retraction_defect,
    tangent_basis,
    tangent_vector,
)
from src.utils.random import GaussianStream


def _flat(i, j, k):
    """Flat index of the 1-based multi-index (i, j, k) in a 3x3x3 tensor."""
    return (i - 1) * 9 + (j - 1) * 3 + (k - 1)


class TestPoints:
    """Test point validation."""

    def test_ambient_is_outer_product(self):
        """The cached ambient vector is the outer product, first index slowest."""
        a, b, c = np.array([1.0, 2.0]), np.array([3.0, -1.0, 0.5]), np.array([2.0, 1.0])
        p = RankOnePoint((a, b, c))
        np.testing.assert_allclose(p.ambient, np.einsum("i,j,k->ijk", a, b, c).reshape(-1), rtol=1e-14)
        assert p.shape.mode_sizes == (2, 3, 2)

    def test_zero_factor_rejected(self):
        """A zero factor is an input error."""
        with pytest.raises(InvalidInputError):
            RankOnePoint((np.ones(3), np.zeros(3), np.ones(3)))

    def test_order_two_rejected(self):
        """Matrices are not tensors of order >= 3."""
        with pytest.raises(InvalidInputError):
            RankOnePoint((np.ones(3), np.ones(3)))

    def test_mismatched_terms_rejected(self):
        """All terms must share one shape."""
        t1 = RankOnePoint((np.ones(3), np.ones(3), np.ones(3)))
        t2 = RankOnePoint((np.ones(3), np.ones(3), np.ones(4)))
        with pytest.raises(InvalidInputError):
            ProductPoint((t1, t2))

    def test_rank_guard(self):
        """r * segre_dim must stay below N."""
        terms = tuple(RankOnePoint((np.ones(2), np.ones(2), np.ones(2))) for _ in range(2))
        with pytest.raises(InvalidInputError):
            ProductPoint(terms)

    def test_pencil_dimension(self):
        """The 3x3x3 rank-2 pencil has 14 tangent coordinates."""
        assert make_pencil(0).point.dim == 14


class TestTangentBasis:
    """Test Terracini blocks and projection."""

    def setup_method(self):
        """Setup test fixtures."""
        self.stream = GaussianStream(7)
        self.point = random_point(self.stream)

    def test_standard_basis_term(self):
        """At e1 x e1 x e1 the block columns are seven standard basis tensors."""
        e1 = np.eye(3)[0]
        block = tangent_basis(RankOnePoint((e1, e1, e1)))
        expected = np.zeros((27, 7))
        for col, idx in enumerate([(1, 1, 1), (2, 1, 1), (3, 1, 1), (1, 2, 1), (1, 3, 1), (1, 1, 2), (1, 1, 3)]):
            expected[_flat(*idx), col] = 1.0
        np.testing.assert_allclose(block.matrix, expected, atol=1e-15)

    def test_orthonormal_columns(self):
        """Every block has orthonormal columns and starts with the unit term."""
        for term in self.point.terms:
            u = tangent_basis(term).matrix
            np.testing.assert_allclose(u.T @ u, np.eye(7), atol=1e-12)
            np.testing.assert_allclose(u[:, 0], term.ambient / np.linalg.norm(term.ambient), atol=1e-12)

    def test_projection_fixes_tangent_vectors(self):
        """Projecting U_i c_i returns c."""
        c = self.stream.normal(self.point.dim)
        eta = tangent_vector(self.point, c)
        np.testing.assert_allclose(project_ambient_to_tangent(self.point, eta.ambient_terms).coords, c, atol=1e-12)

    def test_projection_kills_normal_vectors(self):
        """Vectors orthogonal to each block project to zero."""
        basis = product_tangent_basis(self.point)
        delta = []
        for block in basis.blocks:
            v = self.stream.normal(27)
            delta.append(v - block.matrix @ (block.matrix.T @ v))
        np.testing.assert_allclose(project_ambient_to_tangent(self.point, np.stack(delta)).coords, 0.0, atol=1e-12)

    def test_pythagoras(self):
        """|D - PD|^2 + |PD|^2 = |D|^2."""
        delta = self.stream.normal(2 * 27).reshape(2, 27)
        proj = project_ambient_to_tangent(self.point, delta).ambient_terms
        total = np.sum((delta - proj) ** 2) + np.sum(proj ** 2)
        assert total == pytest.approx(np.sum(delta ** 2), rel=1e-10)

    def test_projection_shape_mismatch(self):
        """Ambient vectors of the wrong size are rejected."""
        with pytest.raises(InvalidInputError):
            project_ambient_to_tangent(self.point, np.zeros((2, 26)))

    def test_tangent_norm_equals_ambient_norm(self):
        """Orthonormal blocks make the coordinate norm the ambient norm."""
        eta = tangent_vector(self.point, self.stream.normal(self.point.dim))
        assert eta.norm == pytest.approx(np.linalg.norm(eta.ambient_terms), rel=1e-12)

    def test_span_matches_derivatives(self):
        """The block spans the central-difference derivatives of the outer product."""
        h = 1e-6
        for term in self.point.terms:
            factors = [np.array(f, dtype=np.float64) for f in term.factors]
            columns = []
            for k, f in enumerate(factors):
                for i in range(f.shape[0]):
                    plus = [g.copy() for g in factors]
                    minus = [g.copy() for g in factors]
                    plus[k][i] += h
                    minus[k][i] -= h
                    columns.append((RankOnePoint(tuple(plus)).ambient - RankOnePoint(tuple(minus)).ambient) / (2 * h))
            derivatives = np.column_stack(columns)
            u, _, _ = np.linalg.svd(derivatives, full_matrices=False)
            angles = subspace_angles(u[:, :7], tangent_basis(term).matrix)
            assert np.max(angles) <= 1e-6

    def test_projection_symmetric(self):
        """<P D, D'> = <D, P D'>."""
        delta = self.stream.normal(2 * 27).reshape(2, 27)
        other = self.stream.normal(2 * 27).reshape(2, 27)
        left = np.sum(project_ambient_to_tangent(self.point, delta).ambient_terms * other)
        right = np.sum(delta * project_ambient_to_tangent(self.point, other).ambient_terms)
        assert left == pytest.approx(right, rel=1e-12, abs=1e-12)


class TestCanonicalFactors:
    """Test the scaling and sign gauge."""

    def test_balanced_and_signed(self):
        """Factors share one norm and only the last carries a negative first entry."""
        units = [np.array([-1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 0.0])]
        factors = canonical_factors(8.0, units)
        for f in factors:
            assert np.linalg.norm(f) == pytest.approx(2.0)
        assert factors[0][0] > 0
        assert factors[2][0] < 0
        np.testing.assert_allclose(
            np.einsum("i,j,k->ijk", *factors), 8.0 * np.einsum("i,j,k->ijk", *units)
        )


class TestRetraction:
    """Test the HOOI retraction."""

    def setup_method(self):
        """Setup test fixtures."""
        self.stream = GaussianStream(11)
        self.point = random_point(self.stream)

    def test_zero_step_returns_point(self):
        """R(p, 0) = p with identical factors."""
        eta = tangent_vector(self.point, np.zeros(self.point.dim))
        moved = retract(self.point, eta)
        for a, b in zip(moved.terms, self.point.terms):
            for fa, fb in zip(a.factors, b.factors):
                np.testing.assert_array_equal(fa, fb)

    def test_scaling_direction_is_exact(self):
        """Moving along the first basis column only rescales the term."""
        t = 0.3
        coords = np.zeros(self.point.dim)
        coords[0] = t
        moved = retract(self.point, tangent_vector(self.point, coords))
        term = self.point.terms[0]
        scale = 1.0 + t / np.linalg.norm(term.ambient)
        np.testing.assert_allclose(moved.terms[0].ambient, scale * term.ambient, rtol=1e-10)
        np.testing.assert_allclose(moved.terms[1].ambient, self.point.terms[1].ambient, rtol=1e-10)
        assert retraction_defect(self.point, tangent_vector(self.point, coords / t), 1e-3) < 1e-12

    def test_defect_at_zero(self):
        """t = 0 gives zero defect."""
        eta = random_unit_tangent(self.point, self.stream)
        assert retraction_defect(self.point, eta, 0.0) == 0.0

    def test_second_order_defect(self):
        """The defect decays like t^2."""
        ts = [1e-2, 1e-3, 1e-4]
        for _ in range(5):
            eta = random_unit_tangent(self.point, self.stream)
            slope = fit_loglog_slope(ts, [retraction_defect(self.point, eta, t) for t in ts])
            assert 1.9 <= slope <= 2.1

    def test_first_order_rigidity(self):
        """Central difference of t -> R(p, t eta) at 0 recovers eta."""
        eta = random_unit_tangent(self.point, self.stream)
        t = 1e-5
        forward = retract(self.point, eta.scaled(t)).ambient_terms
        backward = retract(self.point, eta.scaled(-t)).ambient_terms
        np.testing.assert_allclose((forward - backward) / (2 * t), eta.ambient_terms, atol=1e-4)

    def test_non_finite_step_rejected(self):
        """NaN coordinates are an input error."""
        coords = np.zeros(self.point.dim)
        coords[3] = np.nan
        eta = tangent_vector(self.point, np.zeros(self.point.dim))
        bad = type(eta)(coords=coords, ambient_terms=eta.ambient_terms)
        with pytest.raises(InvalidInputError):
            retract(self.point, bad)

    def test_zero_target_is_singular(self):
        """HOOI of the zero tensor has no rank-1 answer."""
        with pytest.raises(SingularStepError):
            rank_one_hooi(np.zeros((3, 3, 3)), [np.ones(3)] * 3)

    def test_non_convergence_carries_iterate(self):
        """A one-sweep budget on a full-rank tensor fails with the last iterate."""
        tensor = self.stream.normal(27).reshape(3, 3, 3)
        with pytest.raises(RetractionError) as excinfo:
            rank_one_hooi(tensor, [np.array([1.0, 0.0, 0.0])] * 3, max_iters=1)
        assert excinfo.value.iterate is not None
        assert len(excinfo.value.iterate) == 3
