"""Tests for the Riemannian Gauss-Newton solver."""

import numpy as np
import pytest

from src.rgn import InvalidInputError, SolverConfig, SolverStatus
from src.rgn.checks import random_point
from src.rgn.cpd_model import Tensor, condition_number
from src.rgn.diagnostics import error_floor, estimate_order, random_unit_tangent
from src.rgn.experiments import make_pencil
from src.rgn.manifold import ProductPoint, RankOnePoint, make_shape, retract
from src.rgn.solver import config_from_dict, distance, recompute_errors, solve
from src.utils.random import GaussianStream


class TestDistance:
    """Test the permutation-invariant ambient distance."""

    def setup_method(self):
        """Setup test fixtures."""
        self.point = random_point(GaussianStream(1))

    def test_self(self):
        """d(p, p) = 0."""
        assert distance(self.point, self.point) == 0.0

    def test_swap(self):
        """Reordering the terms does not change the point."""
        swapped = ProductPoint((self.point.terms[1], self.point.terms[0]))
        assert distance(self.point, swapped) == 0.0

    def test_scaling_gauge(self):
        """Moving scale between factors does not change the point."""
        a, b, c = self.point.terms[0].factors
        rescaled = ProductPoint((RankOnePoint((2.0 * a, -b, -0.5 * c)), self.point.terms[1]))
        assert distance(self.point, rescaled) == pytest.approx(0.0, abs=1e-14)

    def test_shifted_term(self):
        """Scaling one term by (1 + t) moves the point by t times its norm."""
        a, b, c = self.point.terms[0].factors
        moved = ProductPoint((RankOnePoint((1.1 * a, b, c)), self.point.terms[1]))
        expected = 0.1 * np.linalg.norm(self.point.terms[0].ambient)
        assert distance(self.point, moved) == pytest.approx(expected, rel=1e-12)

    def test_rank_mismatch(self):
        """Different ranks cannot be compared."""
        single = ProductPoint((self.point.terms[0],))
        with pytest.raises(InvalidInputError):
            distance(self.point, single)


class TestConfig:
    """Test solver settings from configuration sections."""

    def test_sections_and_overrides(self):
        """solver and retraction sections are merged; None overrides are ignored."""
        cfg = config_from_dict(
            {"solver": {"max_iters": 7, "grad_tol": 1e-9}, "retraction": {"hooi_tol": 1e-12}},
            grad_tol=1e-16,
            max_iters=None,
        )
        assert cfg.max_iters == 7
        assert cfg.grad_tol == 1e-16
        assert cfg.hooi_tol == 1e-12
        assert cfg.max_hooi_iters == 50

    def test_defaults(self):
        """An empty configuration yields the documented defaults."""
        cfg = config_from_dict({})
        assert (cfg.max_iters, cfg.grad_tol, cfg.step_tol) == (100, 1e-12, 1e-14)


class TestSolve:
    """Test solver runs and traces."""

    def setup_method(self):
        """Setup test fixtures."""
        self.stream = GaussianStream(2024)
        self.pencil = make_pencil(0)

    def test_start_at_solution(self):
        """Starting at an exact decomposition stops at k = 0 with zero gradient."""
        x, trace = solve(self.pencil.tensor, self.pencil.point)
        assert trace.status == SolverStatus.CONVERGED_GRADIENT
        assert len(trace.records) == 1
        assert trace.records[0].grad_norm == 0.0
        assert x is self.pencil.point

    def test_quadratic_convergence(self):
        """Zero-residual runs from 1e-2 away converge with order near 2."""
        direction = random_unit_tangent(self.pencil.point, self.stream)
        x0 = retract(self.pencil.point, direction.scaled(1e-2))
        cfg = SolverConfig(record_reference=self.pencil.point)
        x, trace = solve(self.pencil.tensor, x0, cfg)
        assert not trace.status.is_failure
        assert distance(x, self.pencil.point) < 1e-12
        order, _ = estimate_order(trace, error_floor(self.pencil.point))
        assert order >= 1.8

    def test_linear_convergence_with_noise(self):
        """With a perturbed target the errors to the final iterate shrink by a steady factor."""
        pencil = make_pencil(1)
        noise = self.stream.unit_vector(27)
        target = Tensor(shape=pencil.tensor.shape, data=pencil.tensor.data + 1e-4 * noise)
        x0 = retract(pencil.point, random_unit_tangent(pencil.point, self.stream).scaled(1e-4))
        x, trace = solve(target, x0, SolverConfig(grad_tol=1e-16))
        assert not trace.status.is_failure
        errors = recompute_errors(trace, x).errors()
        floor = error_floor(x)
        usable = [e for e in errors if e > 10 * floor]
        assert len(usable) >= 3
        ratios = [b / a for a, b in zip(usable, usable[1:])]
        assert max(ratios) < 1.0

    def test_trace_kappa_matches_iterates(self):
        """Every recorded kappa equals kappa recomputed at the stored iterate."""
        pencil = make_pencil(3)
        x0 = retract(pencil.point, random_unit_tangent(pencil.point, self.stream).scaled(1e-4))
        _, trace = solve(pencil.tensor, x0, SolverConfig(max_iters=5))
        for rec, x in zip(trace.records, trace.iterates):
            assert rec.kappa == pytest.approx(condition_number(x).kappa, rel=1e-10)

    def test_max_iters(self):
        """A zero iteration cap records the start and stops."""
        x0 = retract(self.pencil.point, random_unit_tangent(self.pencil.point, self.stream).scaled(1e-2))
        x, trace = solve(self.pencil.tensor, x0, SolverConfig(max_iters=0))
        assert trace.status == SolverStatus.MAX_ITERS
        assert len(trace.records) == 1
        assert x is x0

    def test_singular_start(self):
        """Coinciding terms end the run as jacobian-singular with a partial trace."""
        e1 = np.eye(3)[0]
        x0 = ProductPoint((RankOnePoint((e1, e1, e1)), RankOnePoint((e1, e1, e1))))
        _, trace = solve(self.pencil.tensor, x0)
        assert trace.status == SolverStatus.JACOBIAN_SINGULAR
        assert trace.status.is_failure
        assert len(trace.records) == 1
        assert np.isnan(trace.records[0].step_norm)
        assert trace.message

    def test_shape_mismatch(self):
        """Start and target must share a shape."""
        other = Tensor(shape=make_shape((3, 3, 4)), data=np.zeros(36))
        with pytest.raises(InvalidInputError):
            solve(other, self.pencil.point)

    def test_recompute_errors(self):
        """Errors recomputed against the last iterate end at zero."""
        x0 = retract(self.pencil.point, random_unit_tangent(self.pencil.point, self.stream).scaled(1e-3))
        x, trace = solve(self.pencil.tensor, x0)
        assert all(r.error is None for r in trace.records)
        redone = recompute_errors(trace, x)
        assert redone.records[-1].error == 0.0
        assert redone.status == trace.status
