"""Measured ingredients of the local convergence analysis of Riemannian Gauss-Newton."""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import (
    BoundEstimates,
    IllConditionedJacobianError,
    InsufficientDataError,
    InvalidInputError,
    IterationTrace,
)
from .cpd_model import ambient_jacobian
from .linalg import EPS, SvdFactors, compact_svd, pinv_from_factors, spectral_norm
from .manifold import ProductPoint, TangentVector, product_tangent_basis, retract
from .solver import distance
from ..utils.random import GaussianStream


logger = logging.getLogger(__name__)

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0
DEFAULT_ALPHA = 0.9
DEFAULT_TAYLOR_STEPS = (1e-2, 1e-3, 1e-4, 1e-5)


def error_floor(x_star: ProductPoint) -> float:
    """Below 100 * eps * |x_star| errors are rounding noise."""
    return 100.0 * EPS * float(np.linalg.norm(x_star.ambient_vector))


def random_unit_tangent(point: ProductPoint, stream: GaussianStream) -> TangentVector:
    """Tangent vector with Gaussian Terracini coordinates, normalized."""
    return product_tangent_basis(point).lift(stream.unit_vector(point.dim))


def _full_rank_factors(point: ProductPoint) -> SvdFactors:
    factors = compact_svd(ambient_jacobian(point))
    sigma_m = float(factors.singular_values[point.dim - 1])
    if sigma_m <= factors.rank_tol:
        raise IllConditionedJacobianError(sigma_m, factors.rank_tol)
    return factors


def estimate_lipschitz_C(
    x_star: ProductPoint,
    radius: float,
    num_samples: int,
    seed: int,
) -> float:
    """
    Sampled Lipschitz constant of x -> dF_x o P_{T_x} around x_star.

    Samples are x = R(x_star, rho * u) with u a random unit tangent vector and
    rho uniform in [radius/2, radius]. The first n samples for a given seed do
    not depend on num_samples, so the estimate is monotone in num_samples.

    Returns:
        max over samples of |J_amb(x_star) - J_amb(x)|_2 / |x_star - x|
    """
    if num_samples <= 0:
        raise InvalidInputError("estimate_lipschitz_C needs at least one sample")
    if radius <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius}")

    stream = GaussianStream(seed)
    j_star = ambient_jacobian(x_star)
    best = 0.0
    for _ in range(num_samples):
        direction = random_unit_tangent(x_star, stream)
        rho = radius * (0.5 + 0.5 * stream.uniform())
        x = retract(x_star, direction.scaled(rho))
        dist = distance(x, x_star)
        if dist == 0.0:
            continue
        best = max(best, spectral_norm(j_star - ambient_jacobian(x)) / dist)
    logger.debug(f"C_hat={best:.4e} from {num_samples} samples at radius {radius:.1e}")
    return best


def wedin_bound(j: np.ndarray, j_star: np.ndarray, rank: int) -> Tuple[float, float]:
    """
    Pseudoinverse perturbation bound for two matrices of equal rank.

    Returns:
        (|J^+ - J*^+|_2, (1+sqrt5)/2 |J^+|_2 |J*^+|_2 |J - J*|_2)
    """
    f, f_star = compact_svd(j), compact_svd(j_star)
    lhs = spectral_norm(pinv_from_factors(f, rank) - pinv_from_factors(f_star, rank))
    rhs = (
        GOLDEN
        / float(f.singular_values[rank - 1])
        / float(f_star.singular_values[rank - 1])
        * spectral_norm(j - j_star)
    )
    return lhs, rhs


def wedin_gap(x: ProductPoint, x_star: ProductPoint) -> Tuple[float, float]:
    """Wedin bound for the ambient Jacobians at two decompositions."""
    _full_rank_factors(x)
    _full_rank_factors(x_star)
    return wedin_bound(ambient_jacobian(x), ambient_jacobian(x_star), x.dim)


def weyl_bound(j: np.ndarray, j_star: np.ndarray, index: int) -> Tuple[float, float]:
    """
    Weyl's inequality for the index-th singular value (1-based).

    Returns:
        (|sigma_index(J*) - sigma_index(J)|, |J* - J|_2)
    """
    s = compact_svd(j).singular_values[index - 1]
    s_star = compact_svd(j_star).singular_values[index - 1]
    return abs(float(s_star) - float(s)), spectral_norm(j_star - j)


def weyl_check(x: ProductPoint, x_star: ProductPoint) -> Tuple[float, float]:
    """Weyl's inequality for the m-th singular value of the ambient Jacobians."""
    return weyl_bound(ambient_jacobian(x), ambient_jacobian(x_star), x.dim)


def taylor_remainder(map_id: str, x: ProductPoint, y: ProductPoint) -> float:
    """
    Second-order remainder of a first-order expansion at x with projection.

    For "phi": |F(y) - F(x) - J_x P_{T_x}(y - x)|.
    For "identity": |(y - x) - P_{T_x}(y - x)|.
    """
    if map_id not in ("phi", "identity"):
        raise InvalidInputError(f"unknown map {map_id!r}; expected 'phi' or 'identity'")
    delta = y.ambient_terms - x.ambient_terms
    normal = delta - product_tangent_basis(x).project(delta).ambient_terms
    if map_id == "phi":
        # F is the sum of terms, so its remainder sums the per-term normal parts
        return float(np.linalg.norm(normal.sum(axis=0)))
    return float(np.linalg.norm(normal))


def heuristic_E(x1: ProductPoint, x_star: ProductPoint) -> float:
    """E = |J(x1)^+ - J(x_star)^+|_2 / |x1 - x_star|."""
    dist = distance(x1, x_star)
    if dist == 0.0:
        raise InvalidInputError("heuristic_E needs x1 != x_star")
    lhs, _ = wedin_gap(x1, x_star)
    return lhs / dist


def theoretical_linear_rate(
    kappa: float, C_hat: float, residual_star: float, alpha: float = DEFAULT_ALPHA
) -> float:
    """Leading constant (1+sqrt5)/2 * C * kappa^2 * |F(x_star)| / alpha of the linear rate."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    if kappa < 0 or C_hat < 0 or residual_star < 0:
        raise InvalidInputError("kappa, C_hat and residual_star must be nonnegative")
    return GOLDEN * C_hat * kappa**2 * residual_star / alpha


def _as_errors(trace: Union[IterationTrace, Sequence[float]]) -> List[float]:
    if isinstance(trace, IterationTrace):
        return trace.errors()
    return [float(e) for e in trace]


def pre_floor_window(errors: Sequence[float], floor: float) -> List[float]:
    """
    Leading errors above `floor`, cut at the first increase once the errors contract.

    Errors that stall or grow after contraction has started are rounding noise
    around the limit, not part of the convergence history.
    """
    window: List[float] = []
    contracting = False
    for e in errors:
        if e <= floor:
            break
        if window:
            if e < window[-1]:
                contracting = True
            elif contracting:
                break
        window.append(e)
    return window


def estimate_order(
    trace: Union[IterationTrace, Sequence[float]],
    floor: float,
    ceiling: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Fit log e_{k+1} = order * log e_k + log constant.

    Only consecutive pairs of the pre-floor window (with e_k at most `ceiling`,
    when given) enter the fit.

    Raises:
        InsufficientDataError: fewer than three usable errors
    """
    errors = pre_floor_window(_as_errors(trace), floor)
    pairs = [(a, b) for a, b in zip(errors, errors[1:]) if ceiling is None or a <= ceiling]
    if len(pairs) < 2:
        raise InsufficientDataError(
            f"order fit needs three consecutive errors above {floor:.1e}, found {len(errors)}"
        )
    x = np.log([a for a, _ in pairs])
    y = np.log([b for _, b in pairs])
    order, log_c = np.polyfit(x, y, 1)
    return float(order), float(np.exp(log_c))


def estimate_linear_rate(
    trace: Union[IterationTrace, Sequence[float]],
    floor: float,
    ceiling: float = 1e-3,
) -> float:
    """
    Per-step contraction ratio from log e_k = k log(rho) + b.

    Uses the errors of the pre-floor window (above 10 * floor) that are at most `ceiling`.
    """
    errors = pre_floor_window(_as_errors(trace), 10.0 * floor)
    window = [(k, e) for k, e in enumerate(errors) if e <= ceiling]
    if len(window) < 2:
        raise InsufficientDataError(
            f"rate fit needs two errors in [{10 * floor:.1e}, {ceiling:.1e}], found {len(window)}"
        )
    ks = np.array([k for k, _ in window], dtype=np.float64)
    slope, _ = np.polyfit(ks, np.log([e for _, e in window]), 1)
    return float(np.exp(slope))


def fit_loglog_slope(ts: Sequence[float], values: Sequence[float]) -> float:
    """Slope of log(values) against log(ts); nonpositive values are skipped."""
    pts = [(t, v) for t, v in zip(ts, values) if v > 0]
    if len(pts) < 2:
        raise InsufficientDataError("log-log slope needs two positive values")
    slope, _ = np.polyfit(np.log([t for t, _ in pts]), np.log([v for _, v in pts]), 1)
    return float(slope)


def second_order_constants(
    point: ProductPoint,
    steps: Sequence[float] = DEFAULT_TAYLOR_STEPS,
    num_directions: int = 10,
    seed: int = 0,
) -> Dict[str, float]:
    """
    gamma_F, gamma_I and gamma_R as max remainder / t^2 along random retraction curves.

    Returns:
        Dict with keys gamma_F, gamma_I, gamma_R
    """
    stream = GaussianStream(seed)
    gammas = {"gamma_F": 0.0, "gamma_I": 0.0, "gamma_R": 0.0}
    for _ in range(num_directions):
        eta = random_unit_tangent(point, stream)
        for t in steps:
            y = retract(point, eta.scaled(t))
            defect = float(np.linalg.norm(y.ambient_terms - point.ambient_terms - t * eta.ambient_terms))
            gammas["gamma_F"] = max(gammas["gamma_F"], taylor_remainder("phi", point, y) / t**2)
            gammas["gamma_I"] = max(gammas["gamma_I"], taylor_remainder("identity", point, y) / t**2)
            gammas["gamma_R"] = max(gammas["gamma_R"], defect / t**2)
    return gammas


def finite_difference_gradient(
    fn: Callable[[ProductPoint], float], point: ProductPoint, step: float = 1e-6
) -> np.ndarray:
    """Central differences of fn along each Terracini basis direction, through the retraction."""
    basis = product_tangent_basis(point)
    grad = np.zeros(basis.dim)
    for c in range(basis.dim):
        e = np.zeros(basis.dim)
        e[c] = step
        forward = fn(retract(point, basis.lift(e)))
        backward = fn(retract(point, basis.lift(-e)))
        grad[c] = (forward - backward) / (2.0 * step)
    return grad


def estimate_bounds(
    x_star: ProductPoint,
    kappa: float,
    residual_star: float,
    x1: Optional[ProductPoint],
    config: Dict,
    seed: int,
) -> BoundEstimates:
    """
    All measured constants for one local optimizer.

    Args:
        x_star: Local optimizer
        kappa: Condition number at x_star
        residual_star: |F(x_star)|
        x1: First iterate of the run, for the heuristic constant (None skips it)
        config: Full configuration; reads the `diagnostics` section
        seed: Seed for the sampled constants
    """
    diag = config.get("diagnostics", {})
    alpha = diag.get("alpha", DEFAULT_ALPHA)
    samples = diag.get("lipschitz_samples", 50)
    c_hat = estimate_lipschitz_C(x_star, diag.get("lipschitz_radius", 1e-3), samples, seed)
    gammas = second_order_constants(
        x_star, diag.get("taylor_steps", DEFAULT_TAYLOR_STEPS), diag.get("taylor_directions", 10), seed
    )
    e_hat = 0.0
    if x1 is not None and distance(x1, x_star) > 0.0:
        e_hat = heuristic_E(x1, x_star)
    return BoundEstimates(
        C_hat=c_hat,
        gamma_F_hat=gammas["gamma_F"],
        gamma_I_hat=gammas["gamma_I"],
        gamma_R_hat=gammas["gamma_R"],
        E_hat=e_hat,
        theoretical_linear_rate=theoretical_linear_rate(kappa, c_hat, residual_star, alpha),
        alpha=alpha,
        lipschitz_samples=samples,
    )
