"""Sum-of-rank-1 model: residual, objective, Jacobian, gradient, GN step, condition number."""

import logging
from dataclasses import dataclass

import numpy as np

from . import ConditionReport, IllConditionedJacobianError, InvalidInputError, Shape
from .linalg import EPS, compact_svd, pinv_apply, pinv_from_factors
from .manifold import ProductPoint, TangentVector, make_shape, product_tangent_basis


logger = logging.getLogger(__name__)

INJECTIVITY_FACTOR = 1e3


@dataclass(frozen=True, eq=False)
class Tensor:
    """Dense real tensor, vectorized with the first index slowest."""

    shape: Shape
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64).reshape(-1)
        if data.shape[0] != self.shape.size:
            raise InvalidInputError(
                f"tensor of shape {self.shape.mode_sizes} needs {self.shape.size} entries, "
                f"got {data.shape[0]}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("tensor contains non-finite entries")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array) -> "Tensor":
        arr = np.asarray(array, dtype=np.float64)
        return cls(shape=make_shape(arr.shape), data=arr.reshape(-1))

    def as_array(self) -> np.ndarray:
        return self.data.reshape(self.shape.mode_sizes)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.data))


def phi(point: ProductPoint) -> Tensor:
    """Sum of the rank-1 terms."""
    return Tensor(shape=point.shape, data=point.ambient_terms.sum(axis=0))


def _check_target(point: ProductPoint, target: Tensor) -> None:
    if point.shape != target.shape:
        raise InvalidInputError(
            f"decomposition shape {point.shape.mode_sizes} does not match "
            f"tensor shape {target.shape.mode_sizes}"
        )


def residual(point: ProductPoint, target: Tensor) -> np.ndarray:
    """F(x) = phi(x) - target."""
    _check_target(point, target)
    return phi(point).data - target.data


def objective(point: ProductPoint, target: Tensor) -> float:
    """Least-squares cost 1/2 |F(x)|^2."""
    f = residual(point, target)
    return 0.5 * float(f @ f)


def jacobian(point: ProductPoint) -> np.ndarray:
    """
    Matrix of dPhi in the Terracini basis.

    Phi is the sum of the terms, so its derivative along a tangent basis column is
    that column itself and the Jacobian is U = [U_1 ... U_r].
    """
    return product_tangent_basis(point).matrix


def ambient_jacobian(point: ProductPoint) -> np.ndarray:
    """
    Matrix of dF o P_T in ambient product coordinates, [U_1 U_1^T | ... | U_r U_r^T].

    N x rN with rank m; its nonzero singular values are those of the Terracini matrix.
    """
    basis = product_tangent_basis(point)
    return np.hstack([b.matrix @ b.matrix.T for b in basis.blocks])


def ambient_pinv(point: ProductPoint) -> np.ndarray:
    """Rank-m pseudoinverse of the ambient Jacobian."""
    return pinv_from_factors(compact_svd(ambient_jacobian(point)), rank=point.dim)


def gradient(point: ProductPoint, target: Tensor) -> TangentVector:
    """Riemannian gradient J^T F in Terracini coordinates."""
    basis = product_tangent_basis(point)
    f = residual(point, target)
    return basis.lift(basis.matrix.T @ f)


def injectivity_tolerance(sigma_max: float) -> float:
    return INJECTIVITY_FACTOR * EPS * sigma_max


def gn_step(point: ProductPoint, target: Tensor) -> TangentVector:
    """
    Gauss-Newton step -J^+ F.

    Raises:
        IllConditionedJacobianError: if the smallest singular value of J is at or
            below 1e3 * eps * |J|_2
    """
    basis = product_tangent_basis(point)
    f = residual(point, target)
    sv = compact_svd(basis.matrix).singular_values
    tol = injectivity_tolerance(float(sv[0]))
    if sv[-1] <= tol:
        raise IllConditionedJacobianError(float(sv[-1]), tol)
    return basis.lift(-pinv_apply(basis.matrix, f))


def condition_number(point: ProductPoint) -> ConditionReport:
    """kappa(x) = 1 / sigma_m(U); infinite when sigma_m is below the rank tolerance."""
    factors = compact_svd(jacobian(point))
    sigma_min = float(factors.singular_values[-1])
    kappa = 1.0 / sigma_min if sigma_min > factors.rank_tol else float("inf")
    return ConditionReport(
        kappa=kappa,
        sigma_min=sigma_min,
        full_spectrum=factors.singular_values.tolist(),
    )
