"""Random and adversarial perturbation experiments on the rank-2 pencil x(s)."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import (
    ExperimentKind,
    ExperimentSpec,
    IllConditionedJacobianError,
    InsufficientDataError,
    InvalidInputError,
    IterationTrace,
    PencilResult,
    RGNError,
    SolverStatus,
)
from .cpd_model import Tensor, ambient_pinv, condition_number, jacobian, phi, residual
from .diagnostics import (
    error_floor,
    estimate_bounds,
    estimate_linear_rate,
    estimate_order,
    random_unit_tangent,
    wedin_gap,
)
from .linalg import compact_svd
from .manifold import ProductPoint, RankOnePoint, TangentVector, product_tangent_basis, retract
from .report import ReportGenerator
from .solver import config_from_dict, recompute_errors, solve
from ..utils.io import (
    BOUND_CURVE_COLUMNS,
    BOUNDS_COLUMNS,
    ensure_dir,
    save_csv,
    save_decomposition,
    save_json,
    save_tensor,
    save_text,
    save_trace_csv,
)
from ..utils.random import GaussianStream


logger = logging.getLogger(__name__)

@dataclass(frozen=True, eq=False)
class PencilFamily:
    """x(s) = ((e2 - 2^-s e1)^(x3), e2^(x3)) with x(0) using e1^(x3), and A(s) = phi(x(s))."""

    s: int
    point: ProductPoint
    tensor: Tensor


def make_pencil(s: int) -> PencilFamily:
    """Rank-2 3x3x3 decomposition whose terms become collinear as s grows."""
    if isinstance(s, bool) or int(s) != s or s < 0:
        raise InvalidInputError(f"s must be a nonnegative integer, got {s!r}")
    s = int(s)
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    first = e1 if s == 0 else e2 - 2.0 ** (-s) * e1
    point = ProductPoint((RankOnePoint((first, first, first)), RankOnePoint((e2, e2, e2))))
    return PencilFamily(s=s, point=point, tensor=phi(point))


def pinv_difference_direction(point: ProductPoint, vector: np.ndarray, step: float = 1e-6) -> TangentVector:
    """
    Steepest-ascent direction of f(x) = 1/2 |(J(point)^+ - J(x)^+) vector|^2 at `point`.

    f vanishes to second order at `point`, so its first derivative is zero there.
    The vector map x -> (J(point)^+ - J(x)^+) vector is differentiated instead, by
    central differences over the tangent coordinates; the ascent direction is its
    dominant right singular vector, scaled by the singular value.
    """
    basis = product_tangent_basis(point)
    columns = []
    for c in range(basis.dim):
        e = np.zeros(basis.dim)
        e[c] = step
        plus = ambient_pinv(retract(point, basis.lift(e))) @ vector
        minus = ambient_pinv(retract(point, basis.lift(-e))) @ vector
        columns.append(-(plus - minus) / (2.0 * step))
    factors = compact_svd(np.column_stack(columns))
    direction = factors.right[:, 0]
    pivot = np.flatnonzero(np.abs(direction) > 1e-12)
    if pivot.size and direction[pivot[0]] < 0:
        direction = -direction
    return basis.lift(factors.singular_values[0] * direction)


def smallest_left_singular_vector(point: ProductPoint) -> np.ndarray:
    """Left singular vector u_m of the m-th singular value of the Jacobian."""
    return compact_svd(jacobian(point)).left[:, point.dim - 1]


def perturbation_alignment(z: np.ndarray, point: ProductPoint, cluster_tol: float = 1e-8) -> float:
    """
    Length of the projection of unit `z` onto the sigma_m left singular space at `point`.

    The decomposition is recomputed with numpy's LAPACK driver. Singular values
    within cluster_tol * sigma_max of sigma_m share the space, so a repeated
    sigma_m does not make the answer depend on the basis either driver picks.
    """
    u, sv, _ = np.linalg.svd(jacobian(point), full_matrices=False)
    m = point.dim
    cluster = np.abs(sv[:m] - sv[m - 1]) <= cluster_tol * sv[0]
    return float(np.linalg.norm(u[:, :m][:, cluster].T @ z))


def bound_curve(
    errors: Sequence[float],
    floor: float,
    ceiling: float,
    theoretical_rate: float,
    heuristic_rate: float,
) -> List[Dict]:
    """
    Observed errors with theoretical and heuristic envelopes.

    Envelopes start at the first error in [10 * floor, ceiling] and are
    e_start * rate^(k - start); powers that overflow become inf.
    """
    start = next((k for k, e in enumerate(errors) if 10.0 * floor <= e <= ceiling), None)
    rows = [
        {"iter": k, "error": e, "theoretical_bound": None, "heuristic_bound": None}
        for k, e in enumerate(errors)
    ]
    if start is None:
        return rows
    steps = np.arange(len(errors) - start, dtype=np.float64)
    with np.errstate(over="ignore"):
        theoretical = errors[start] * np.power(np.float64(theoretical_rate), steps)
        heuristic = errors[start] * np.power(np.float64(heuristic_rate), steps)
    for row, t, h in zip(rows[start:], theoretical, heuristic):
        row["theoretical_bound"] = float(t)
        row["heuristic_bound"] = float(h)
    return rows


def _failure_status(error: RGNError) -> SolverStatus:
    if isinstance(error, IllConditionedJacobianError):
        return SolverStatus.JACOBIAN_SINGULAR
    return SolverStatus.RETRACTION_FAILED


@dataclass
class PencilRun:
    """One s-value of an experiment: the measured summary plus its artifacts."""

    result: PencilResult
    target: Tensor
    x_start: Optional[ProductPoint] = None
    x_star: Optional[ProductPoint] = None
    linear_trace: Optional[IterationTrace] = None
    quadratic_trace: Optional[IterationTrace] = None
    bound_curve: List[Dict] = field(default_factory=list)


class ExperimentRunner:
    """Run the perturbation experiments and write their artifacts."""

    def __init__(self, config: Dict):
        """
        Initialize runner.

        Args:
            config: Configuration dictionary
        """
        self.config = config
        self.experiment_config = config.get("experiment", {})
        self.solver_cfg = config_from_dict(config, **self.experiment_config.get("solver", {}))
        self.fd_step = self.experiment_config.get("fd_step", 1e-6)
        self.bound_window = self.experiment_config.get("bound_window", 1e-3)
        self.max_workers = self.experiment_config.get("max_workers", 4)

    def run(self, spec: ExperimentSpec) -> List[PencilRun]:
        """Run every s-value of the spec; results keep the order of spec.s_values."""
        logger.info(f"Running {spec.kind.value} experiment for s={spec.s_values} seed={spec.seed}")
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            runs = list(pool.map(lambda s: self.run_pencil(spec, s), spec.s_values))
        logger.info(f"Experiment finished, {sum(r.result.failed for r in runs)} s-values with solver failures")
        return runs

    def run_pencil(self, spec: ExperimentSpec, s: int) -> PencilRun:
        """All runs and measurements for one s."""
        stream = GaussianStream(spec.seed, s)
        pencil = make_pencil(s)
        x, tensor = pencil.point, pencil.tensor
        result = PencilResult(s=s, kappa_start=condition_number(x).kappa)

        try:
            x_start, direction, data_direction = self._start(spec, x, stream)
        except RGNError as e:
            logger.error(f"s={s}: start point construction failed: {e}")
            result.notes.append(f"start point: {e}")
            status = _failure_status(e)
            result.quadratic_status = status
            if not spec.zero_residual:
                result.linear_status = status
            return PencilRun(result=result, target=tensor)

        if spec.zero_residual:
            target = tensor
        else:
            target = Tensor(shape=tensor.shape, data=tensor.data + spec.data_perturbation * data_direction)
            if spec.kind == ExperimentKind.ADVERSARIAL:
                z = (target.data - tensor.data) / spec.data_perturbation
                result.perturbation_alignment = perturbation_alignment(z, x_start)
        run = PencilRun(result=result, target=target, x_start=x_start)

        if not spec.zero_residual:
            try:
                self._linear_run(spec, run)
            except RGNError as e:
                logger.error(f"s={s}: linear-regime diagnostics failed: {e}")
                result.notes.append(f"linear diagnostics: {e}")

        try:
            x_quad = retract(x, direction.scaled(spec.quadratic_start_perturbation))
        except RGNError as e:
            logger.error(f"s={s}: quadratic-regime start failed: {e}")
            result.notes.append(f"quadratic start: {e}")
            result.quadratic_status = _failure_status(e)
            return run
        try:
            self._quadratic_run(run, pencil, x_quad)
        except RGNError as e:
            logger.error(f"s={s}: quadratic-regime diagnostics failed: {e}")
            result.notes.append(f"quadratic diagnostics: {e}")
        return run

    def _start(
        self, spec: ExperimentSpec, x: ProductPoint, stream: GaussianStream
    ) -> Tuple[ProductPoint, TangentVector, np.ndarray]:
        """Perturbed start x'(s), its unit tangent direction and the unit data direction."""
        if spec.kind == ExperimentKind.RANDOM:
            direction = random_unit_tangent(x, stream)
            x_start = retract(x, direction.scaled(spec.start_perturbation))
            return x_start, direction, stream.unit_vector(x.shape.size)

        vector = stream.normal(x.shape.size)
        ascent = pinv_difference_direction(x, vector, self.fd_step)
        direction = ascent.scaled(1.0 / ascent.norm)
        x_start = retract(x, direction.scaled(spec.start_perturbation))
        return x_start, direction, smallest_left_singular_vector(x_start)

    def _linear_run(self, spec: ExperimentSpec, run: PencilRun) -> None:
        result = run.result
        x_star, trace = solve(run.target, run.x_start, self.solver_cfg)
        trace = recompute_errors(trace, x_star)
        run.x_star, run.linear_trace = x_star, trace
        result.linear_status = trace.status
        result.linear_iterations = len(trace.records)
        result.kappa_star = condition_number(x_star).kappa
        result.residual_star = float(np.linalg.norm(residual(x_star, run.target)))
        if trace.status.is_failure:
            result.notes.append(f"linear run: {trace.message}")
            return

        floor = error_floor(x_star)
        try:
            result.fitted_rate = estimate_linear_rate(trace, floor, self.bound_window)
        except InsufficientDataError as e:
            result.notes.append(f"fitted rate: {e}")
        try:
            result.fitted_order, _ = estimate_order(trace, 10.0 * floor, self.bound_window)
        except InsufficientDataError as e:
            result.notes.append(f"fitted order: {e}")

        x1 = trace.iterates[1] if len(trace.iterates) > 1 else None
        result.bounds = estimate_bounds(
            x_star, result.kappa_star, result.residual_star, x1, self.config, spec.seed
        )
        if spec.kind == ExperimentKind.ADVERSARIAL:
            result.wedin_lhs, result.wedin_rhs = wedin_gap(run.x_start, x_star)
        run.bound_curve = bound_curve(
            trace.errors(),
            floor,
            self.bound_window,
            result.bounds.theoretical_linear_rate,
            result.bounds.E_hat * result.residual_star,
        )

    def _quadratic_run(self, run: PencilRun, pencil: PencilFamily, x_quad: ProductPoint) -> None:
        result = run.result
        cfg = self.solver_cfg.model_copy(update={"record_reference": pencil.point})
        x_final, trace = solve(pencil.tensor, x_quad, cfg)
        run.quadratic_trace = trace
        result.quadratic_status = trace.status
        result.quadratic_iterations = len(trace.records)
        result.quadratic_final_residual = float(np.linalg.norm(residual(x_final, pencil.tensor)))
        if result.kappa_star is None:
            result.kappa_star = condition_number(x_final).kappa
            result.residual_star = result.quadratic_final_residual
        if trace.status.is_failure:
            result.notes.append(f"quadratic run: {trace.message}")
            return
        try:
            result.quadratic_order, _ = estimate_order(trace, error_floor(pencil.point))
        except InsufficientDataError as e:
            result.notes.append(f"quadratic order: {e}")

    def write(self, runs: List[PencilRun], out_dir: str, spec: ExperimentSpec) -> None:
        """Per-s artifacts, bounds.csv, results.json and report.md under `out_dir`."""
        out = Path(out_dir)
        ensure_dir(str(out))
        output_config = self.config.get("output", {})
        for run in runs:
            s_dir = out / f"s{run.result.s}"
            save_tensor(run.target, str(s_dir / "target.json"))
            if output_config.get("write_decompositions", True):
                if run.x_start is not None:
                    save_decomposition(run.x_start, str(s_dir / "x_start.json"))
                if run.x_star is not None:
                    save_decomposition(run.x_star, str(s_dir / "x_star.json"))
            if run.linear_trace is not None:
                save_trace_csv(run.linear_trace, str(s_dir / "trace_linear.csv"))
            if run.quadratic_trace is not None:
                save_trace_csv(run.quadratic_trace, str(s_dir / "trace_quadratic.csv"))
            if run.bound_curve:
                save_csv(run.bound_curve, str(s_dir / "bound_curve.csv"), BOUND_CURVE_COLUMNS)

        save_csv([self._bounds_row(run.result) for run in runs], str(out / "bounds.csv"), BOUNDS_COLUMNS)
        save_json(
            {"spec": spec.model_dump(mode="json"), "results": [r.result.model_dump(mode="json") for r in runs]},
            str(out / "results.json"),
        )
        if output_config.get("write_report", True):
            save_text(ReportGenerator().generate(spec, [r.result for r in runs]), str(out / "report.md"))
        logger.info(f"Wrote experiment artifacts to {out}")

    @staticmethod
    def _bounds_row(result: PencilResult) -> Dict:
        bounds = result.bounds
        return {
            "s": result.s,
            "kappa_star": result.kappa_star,
            "residual_star": result.residual_star,
            "C_hat": bounds.C_hat if bounds else None,
            "E_hat": bounds.E_hat if bounds else None,
            "theoretical_rate": bounds.theoretical_linear_rate if bounds else None,
            "fitted_rate": result.fitted_rate,
            "fitted_order": result.fitted_order,
        }
