"""Riemannian Gauss-Newton for rank-r CP decompositions: shared models and errors."""

from enum import Enum
from typing import TYPE_CHECKING, Any, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

if TYPE_CHECKING:
    from .manifold import ProductPoint as DecompositionPoint
else:
    DecompositionPoint = Any


class RGNError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(RGNError, ValueError):
    """Input violates a documented precondition."""


class FileFormatError(InvalidInputError):
    """A tensor or decomposition file could not be parsed."""

    def __init__(self, path: str, location: str, reason: str):
        self.path = path
        self.location = location
        self.reason = reason
        super().__init__(f"{path}: {location}: {reason}")


class RetractionError(RGNError):
    """Rank-1 HOOI did not converge; `iterate` holds the last factors."""

    def __init__(self, message: str, iterate: Any = None):
        super().__init__(message)
        self.iterate = iterate


class SingularStepError(RetractionError):
    """The retracted term is the zero tensor; no rank-1 point to return."""


class IllConditionedJacobianError(RGNError):
    """The Jacobian is numerically non-injective."""

    def __init__(self, sigma_min: float, tolerance: float):
        self.sigma_min = sigma_min
        self.tolerance = tolerance
        super().__init__(
            f"smallest singular value {sigma_min:.3e} is below injectivity tolerance {tolerance:.3e}"
        )


class InsufficientDataError(RGNError):
    """Too few usable points for a rate fit."""


class Shape(BaseModel):
    """Mode sizes (m_1, ..., m_d) of a dense real tensor."""

    model_config = ConfigDict(frozen=True)

    mode_sizes: Tuple[int, ...]

    @field_validator("mode_sizes")
    @classmethod
    def _check_modes(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(value) < 3:
            raise ValueError(f"need at least 3 modes, got {len(value)}")
        if any(m < 2 for m in value):
            raise ValueError(f"every mode size must be >= 2, got {value}")
        return value

    @property
    def order(self) -> int:
        return len(self.mode_sizes)

    @property
    def size(self) -> int:
        """Ambient dimension N = m_1 ... m_d."""
        n = 1
        for m in self.mode_sizes:
            n *= m
        return n

    @property
    def segre_dim(self) -> int:
        """Dimension of the rank-1 manifold, 1 + sum(m_k - 1)."""
        return 1 + sum(m - 1 for m in self.mode_sizes)


class ConditionReport(BaseModel):
    """Geometric condition number of a decomposition."""

    kappa: float
    sigma_min: float
    full_spectrum: List[float]


class SolverStatus(str, Enum):
    """Why a solve stopped."""
    RUNNING = "running"
    CONVERGED_GRADIENT = "converged-gradient"
    CONVERGED_STEP = "converged-step"
    MAX_ITERS = "max-iters"
    JACOBIAN_SINGULAR = "jacobian-singular"
    RETRACTION_FAILED = "retraction-failed"

    @property
    def is_failure(self) -> bool:
        return self in (SolverStatus.JACOBIAN_SINGULAR, SolverStatus.RETRACTION_FAILED)


class SolverConfig(BaseModel):
    """Stopping rules and retraction budget for one solve."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    max_iters: int = Field(default=100, ge=0)
    grad_tol: float = Field(default=1e-12, gt=0)
    step_tol: float = Field(default=1e-14, gt=0)
    max_hooi_iters: int = Field(default=50, ge=1)
    hooi_tol: float = Field(default=1e-14, gt=0)
    record_reference: Optional[DecompositionPoint] = None


class IterationRecord(BaseModel):
    """One row of a convergence trace."""

    iter: int
    error: Optional[float] = None
    residual: float
    grad_norm: float
    step_norm: float
    sigma_min: float
    kappa: float


class IterationTrace(BaseModel):
    """Per-iteration records of a solve plus its final status."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    records: List[IterationRecord] = Field(default_factory=list)
    status: SolverStatus = SolverStatus.RUNNING
    message: Optional[str] = None
    iterates: List[DecompositionPoint] = Field(default_factory=list, exclude=True)

    def errors(self) -> List[float]:
        """Recorded errors to the reference, skipping rows without one."""
        return [r.error for r in self.records if r.error is not None]


class BoundEstimates(BaseModel):
    """Measured ingredients of the local convergence bound."""

    C_hat: float = Field(ge=0)
    gamma_F_hat: float = Field(ge=0)
    gamma_I_hat: float = Field(ge=0)
    gamma_R_hat: float = Field(ge=0)
    E_hat: float = Field(ge=0)
    theoretical_linear_rate: float = Field(ge=0)
    alpha: float = Field(gt=0, lt=1)
    lipschitz_samples: int = 0


class ExperimentKind(str, Enum):
    RANDOM = "random"
    ADVERSARIAL = "adversarial"


class ExperimentSpec(BaseModel):
    """Inputs of one experiment run."""

    kind: ExperimentKind = ExperimentKind.RANDOM
    s_values: List[int] = Field(default_factory=lambda: [0, 1, 3, 5], min_length=1)
    start_perturbation: float = Field(default=1e-6, gt=0)
    data_perturbation: float = Field(default=1e-6, gt=0)
    quadratic_start_perturbation: float = Field(default=1e-2, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    zero_residual: bool = False

    @field_validator("s_values")
    @classmethod
    def _check_s(cls, value: List[int]) -> List[int]:
        if any(s < 0 for s in value):
            raise ValueError(f"s values must be nonnegative, got {value}")
        return value


class PencilResult(BaseModel):
    """Everything measured for one value of s."""

    s: int
    kappa_start: float
    kappa_star: Optional[float] = None
    residual_star: Optional[float] = None
    linear_status: Optional[SolverStatus] = None
    quadratic_status: Optional[SolverStatus] = None
    linear_iterations: int = 0
    quadratic_iterations: int = 0
    bounds: Optional[BoundEstimates] = None
    fitted_rate: Optional[float] = None
    fitted_order: Optional[float] = None
    quadratic_order: Optional[float] = None
    quadratic_final_residual: Optional[float] = None
    wedin_lhs: Optional[float] = None
    wedin_rhs: Optional[float] = None
    perturbation_alignment: Optional[float] = None
    notes: List[str] = Field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(
            status is not None and status.is_failure
            for status in (self.linear_status, self.quadratic_status)
        )


class PropertyReport(BaseModel):
    """Outcome of one property suite run by `check`."""

    name: str
    cases: int
    violations: int
    worst_ratio: float = 0.0
    slopes: List[float] = Field(default_factory=list)
    details: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0


__all__ = [
    "RGNError",
    "InvalidInputError",
    "FileFormatError",
    "RetractionError",
    "SingularStepError",
    "IllConditionedJacobianError",
    "InsufficientDataError",
    "Shape",
    "ConditionReport",
    "SolverStatus",
    "SolverConfig",
    "IterationRecord",
    "IterationTrace",
    "BoundEstimates",
    "ExperimentKind",
    "ExperimentSpec",
    "PencilResult",
    "PropertyReport",
]
