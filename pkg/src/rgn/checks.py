"""Property suites: Taylor and retraction orders, Wedin and Weyl bounds, gradient oracles."""

import logging
from typing import Callable, Dict, List, Sequence

import numpy as np

from . import InvalidInputError, PropertyReport
from .cpd_model import Tensor, gn_step, gradient, jacobian, objective, residual
from .diagnostics import (
    DEFAULT_TAYLOR_STEPS,
    finite_difference_gradient,
    fit_loglog_slope,
    random_unit_tangent,
    taylor_remainder,
    wedin_gap,
    weyl_check,
)
from .experiments import make_pencil
from .linalg import pinv_apply
from .manifold import ProductPoint, RankOnePoint, retract, retraction_defect
from ..utils.random import GaussianStream


logger = logging.getLogger(__name__)

PROPERTIES = ("taylor", "retraction", "wedin", "weyl", "gradient")
SLOPE_RANGE = (1.9, 2.1)
PENCIL_S = (0, 1, 3, 5)


def random_point(stream: GaussianStream, dims: Sequence[int] = (3, 3, 3), rank: int = 2) -> ProductPoint:
    """Decomposition with standard normal factor entries."""
    return ProductPoint(tuple(
        RankOnePoint(tuple(stream.normal(m) for m in dims)) for _ in range(rank)
    ))


class PropertyChecker:
    """Run the numerical property suites on random and pencil decompositions."""

    def __init__(self, config: Dict):
        """
        Initialize checker.

        Args:
            config: Configuration dictionary; reads the `diagnostics` section
        """
        self.config = config
        diag = config.get("diagnostics", {})
        self.steps = list(diag.get("taylor_steps", DEFAULT_TAYLOR_STEPS))
        self.configurations = diag.get("check_configurations", 100)
        self.pair_count = diag.get("pair_count", 1000)
        self.pair_radius = diag.get("pair_radius", 1e-3)
        self.fd_step = diag.get("fd_step", 1e-6)

    def run(self, name: str, seed: int) -> PropertyReport:
        suites: Dict[str, Callable[[int], PropertyReport]] = {
            "taylor": self.check_taylor,
            "retraction": self.check_retraction,
            "wedin": self.check_wedin,
            "weyl": self.check_weyl,
            "gradient": self.check_gradient,
        }
        if name not in suites:
            raise InvalidInputError(f"unknown property {name!r}; choose from {', '.join(PROPERTIES)}")
        logger.info(f"Checking property {name} with seed {seed}")
        report = suites[name](seed)
        logger.info(f"{name}: {report.violations} violations in {report.cases} cases")
        return report

    def _slope_report(self, name: str, values_for: Callable[[ProductPoint, object], List[List[float]]],
                      seed: int) -> PropertyReport:
        stream = GaussianStream(seed)
        report = PropertyReport(name=name, cases=0, violations=0)
        worst = 0.0
        for i in range(self.configurations):
            point = random_point(stream)
            eta = random_unit_tangent(point, stream)
            for series in values_for(point, eta):
                slope = fit_loglog_slope(self.steps, series)
                report.cases += 1
                report.slopes.append(slope)
                worst = max(worst, abs(slope - 2.0))
                if not SLOPE_RANGE[0] <= slope <= SLOPE_RANGE[1]:
                    report.violations += 1
                    report.details.append(f"configuration {i}: slope {slope:.3f}")
        report.worst_ratio = worst
        return report

    def check_taylor(self, seed: int) -> PropertyReport:
        """Remainders of phi and the identity scale like t^2 along retraction curves."""
        def series(point, eta):
            phi_vals, id_vals = [], []
            for t in self.steps:
                y = retract(point, eta.scaled(t))
                phi_vals.append(taylor_remainder("phi", point, y))
                id_vals.append(taylor_remainder("identity", point, y))
            return [phi_vals, id_vals]

        return self._slope_report("taylor", series, seed)

    def check_retraction(self, seed: int) -> PropertyReport:
        """Second-order defect plus the local rigidity check at t = 1e-5."""
        report = self._slope_report(
            "retraction",
            lambda point, eta: [[retraction_defect(point, eta, t) for t in self.steps]],
            seed,
        )
        stream = GaussianStream(seed, 1)
        t = 1e-5
        for i in range(self.configurations):
            point = random_point(stream)
            eta = random_unit_tangent(point, stream)
            forward = retract(point, eta.scaled(t)).ambient_terms
            backward = retract(point, eta.scaled(-t)).ambient_terms
            deviation = float(np.linalg.norm((forward - backward) / (2 * t) - eta.ambient_terms))
            report.cases += 1
            if deviation > 1e-4:
                report.violations += 1
                report.details.append(f"rigidity {i}: deviation {deviation:.2e}")
        return report

    def _pairs(self, seed: int):
        stream = GaussianStream(seed)
        for s in PENCIL_S:
            x_star = make_pencil(s).point
            for _ in range(self.pair_count):
                direction = random_unit_tangent(x_star, stream)
                rho = self.pair_radius * stream.uniform()
                yield s, retract(x_star, direction.scaled(rho)), x_star

    def _inequality_report(self, name: str, check, seed: int, slack: float) -> PropertyReport:
        report = PropertyReport(name=name, cases=0, violations=0)
        for s, x, x_star in self._pairs(seed):
            lhs, rhs = check(x, x_star)
            report.cases += 1
            if rhs > 0:
                report.worst_ratio = max(report.worst_ratio, lhs / rhs)
            if lhs > rhs * (1.0 + slack):
                report.violations += 1
                report.details.append(f"s={s}: lhs {lhs:.3e} > rhs {rhs:.3e}")
        return report

    def check_wedin(self, seed: int) -> PropertyReport:
        return self._inequality_report("wedin", wedin_gap, seed, 1e-8)

    def check_weyl(self, seed: int) -> PropertyReport:
        return self._inequality_report("weyl", weyl_check, seed, 1e-8)

    def check_gradient(self, seed: int) -> PropertyReport:
        """Gradient against finite differences, GN normal equations, pinv against normal equations."""
        stream = GaussianStream(seed)
        report = PropertyReport(name="gradient", cases=0, violations=0)
        for i in range(min(self.configurations, 20)):
            point = random_point(stream)
            target = Tensor(shape=point.shape, data=stream.normal(point.shape.size))

            fd = finite_difference_gradient(lambda x: objective(x, target), point, self.fd_step)
            gap = float(np.max(np.abs(fd - gradient(point, target).coords)))
            report.cases += 1
            report.worst_ratio = max(report.worst_ratio, gap)
            if gap > 1e-4:
                report.violations += 1
                report.details.append(f"configuration {i}: gradient gap {gap:.2e}")

            j = jacobian(point)
            f = residual(point, target)
            eta = gn_step(point, target).coords
            lhs, rhs = j.T @ j @ eta, -j.T @ f
            report.cases += 1
            if np.linalg.norm(lhs - rhs) > 1e-8 * max(np.linalg.norm(rhs), 1e-300):
                report.violations += 1
                report.details.append(f"configuration {i}: normal equations violated")

            a = stream.normal(24).reshape(6, 4)
            b = stream.normal(6)
            expected = np.linalg.solve(a.T @ a, a.T @ b)
            report.cases += 1
            if np.linalg.norm(pinv_apply(a, b) - expected) > 1e-8 * np.linalg.norm(expected):
                report.violations += 1
                report.details.append(f"configuration {i}: pseudoinverse solve mismatch")
        return report
