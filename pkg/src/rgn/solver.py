"""Riemannian Gauss-Newton iteration with stopping rules and trace recording."""

import logging
from itertools import permutations
from typing import Dict, Optional, Tuple

import numpy as np

from . import (
    IllConditionedJacobianError,
    InvalidInputError,
    IterationRecord,
    IterationTrace,
    RetractionError,
    SolverConfig,
    SolverStatus,
)
from .cpd_model import Tensor, condition_number, gn_step, gradient, residual
from .manifold import ProductPoint, retract


logger = logging.getLogger(__name__)


def distance(p: ProductPoint, q: ProductPoint) -> float:
    """
    Ambient product-space distance, minimized over term permutations.

    Ambient terms do not see the scaling and sign gauge of the factors, so two
    factor representations of the same point compare equal.
    """
    if p.rank != q.rank:
        raise InvalidInputError(f"rank mismatch: {p.rank} vs {q.rank}")
    if p.shape != q.shape:
        raise InvalidInputError(f"shape mismatch: {p.shape.mode_sizes} vs {q.shape.mode_sizes}")
    a, b = p.ambient_terms, q.ambient_terms
    best = min(
        float(np.sum((a - b[list(perm)]) ** 2)) for perm in permutations(range(p.rank))
    )
    return float(np.sqrt(best))


def config_from_dict(config: Dict, **overrides) -> SolverConfig:
    """Solver settings from the `solver` and `retraction` config sections."""
    values = dict(config.get("solver", {}))
    retraction = config.get("retraction", {})
    if "max_hooi_iters" in retraction:
        values["max_hooi_iters"] = retraction["max_hooi_iters"]
    if "hooi_tol" in retraction:
        values["hooi_tol"] = retraction["hooi_tol"]
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**values)


def solve(
    target: Tensor, x0: ProductPoint, cfg: Optional[SolverConfig] = None
) -> Tuple[ProductPoint, IterationTrace]:
    """
    Run x_{k+1} = R(x_k, -(dF)^+ F(x_k)) from `x0`.

    Stops when the gradient norm drops to grad_tol, the step norm to step_tol, or
    after max_iters steps. A singular Jacobian or a failed retraction ends the run
    with the matching status instead of raising.

    Args:
        target: Tensor to decompose
        x0: Starting decomposition
        cfg: Stopping rules; defaults to SolverConfig()

    Returns:
        Final iterate and the full trace
    """
    cfg = cfg or SolverConfig()
    if x0.shape != target.shape:
        raise InvalidInputError(
            f"start shape {x0.shape.mode_sizes} does not match tensor shape {target.shape.mode_sizes}"
        )
    reference = cfg.record_reference
    trace = IterationTrace()
    x = x0

    for k in range(cfg.max_iters + 1):
        trace.iterates.append(x)
        report = condition_number(x)
        res_norm = float(np.linalg.norm(residual(x, target)))
        grad_norm = gradient(x, target).norm
        error = distance(x, reference) if reference is not None else None

        def record(step_norm: float) -> None:
            trace.records.append(IterationRecord(
                iter=k,
                error=error,
                residual=res_norm,
                grad_norm=grad_norm,
                step_norm=step_norm,
                sigma_min=report.sigma_min,
                kappa=report.kappa,
            ))

        if grad_norm <= cfg.grad_tol:
            record(0.0)
            trace.status = SolverStatus.CONVERGED_GRADIENT
            break
        if k == cfg.max_iters:
            record(0.0)
            trace.status = SolverStatus.MAX_ITERS
            break

        try:
            eta = gn_step(x, target)
        except IllConditionedJacobianError as e:
            record(float("nan"))
            trace.status = SolverStatus.JACOBIAN_SINGULAR
            trace.message = str(e)
            logger.warning(f"Stopping at iteration {k}: {e}")
            break

        record(eta.norm)
        logger.debug(
            f"iter {k}: residual={res_norm:.3e} grad={grad_norm:.3e} "
            f"step={eta.norm:.3e} kappa={report.kappa:.3e}"
        )
        if eta.norm <= cfg.step_tol:
            trace.status = SolverStatus.CONVERGED_STEP
            break

        try:
            x = retract(x, eta, cfg.max_hooi_iters, cfg.hooi_tol)
        except RetractionError as e:
            trace.status = SolverStatus.RETRACTION_FAILED
            trace.message = str(e)
            logger.warning(f"Stopping at iteration {k}: {e}")
            break

    logger.info(f"Solve finished with status {trace.status.value} after {len(trace.records)} records")
    return x, trace


def recompute_errors(trace: IterationTrace, reference: ProductPoint) -> IterationTrace:
    """Copy of `trace` with errors measured against `reference` (e.g. the final iterate)."""
    if len(trace.iterates) < len(trace.records):
        raise InvalidInputError("trace does not carry its iterates")
    records = [
        rec.model_copy(update={"error": distance(x, reference)})
        for rec, x in zip(trace.records, trace.iterates)
    ]
    return IterationTrace(
        records=records,
        status=trace.status,
        message=trace.message,
        iterates=list(trace.iterates),
    )
