"""The manifold of rank-1 tensors, its r-fold product, tangent spaces and retraction."""

import logging
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from . import InvalidInputError, RetractionError, Shape, SingularStepError
from .linalg import orthonormal_complement


logger = logging.getLogger(__name__)

DEFAULT_MAX_HOOI_ITERS = 50
DEFAULT_HOOI_TOL = 1e-14


def outer_vector(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Vectorized outer product, first index slowest."""
    return reduce(np.kron, vectors)


def make_shape(mode_sizes: Sequence[int]) -> Shape:
    try:
        return Shape(mode_sizes=tuple(int(m) for m in mode_sizes))
    except ValidationError as e:
        raise InvalidInputError(f"invalid tensor shape {tuple(mode_sizes)}: {e.errors()[0]['msg']}")


@dataclass(frozen=True, eq=False)
class RankOnePoint:
    """A rank-1 tensor a^(1) x ... x a^(d) kept as its factor vectors."""

    factors: Tuple[np.ndarray, ...]

    def __post_init__(self):
        factors = tuple(np.array(f, dtype=np.float64).reshape(-1) for f in self.factors)
        for k, f in enumerate(factors):
            if not np.all(np.isfinite(f)):
                raise InvalidInputError(f"factor {k} has non-finite entries")
            if not np.any(f):
                raise InvalidInputError(f"factor {k} is the zero vector")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "shape", make_shape([f.shape[0] for f in factors]))

    @cached_property
    def ambient(self) -> np.ndarray:
        return outer_vector(self.factors)

    @property
    def norm(self) -> float:
        return float(np.prod([np.linalg.norm(f) for f in self.factors]))

    def unit_factors(self) -> List[np.ndarray]:
        return [f / np.linalg.norm(f) for f in self.factors]


@dataclass(frozen=True, eq=False)
class ProductPoint:
    """An r-tuple of rank-1 tensors sharing one shape."""

    terms: Tuple[RankOnePoint, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if len(terms) == 0:
            raise InvalidInputError("a decomposition needs at least one term")
        shape = terms[0].shape
        for i, term in enumerate(terms[1:], start=1):
            if term.shape != shape:
                raise InvalidInputError(
                    f"term {i} has shape {term.shape.mode_sizes}, expected {shape.mode_sizes}"
                )
        if len(terms) * shape.segre_dim >= shape.size:
            raise InvalidInputError(
                f"rank {len(terms)} is too large for shape {shape.mode_sizes}: "
                f"{len(terms)} * {shape.segre_dim} >= {shape.size}"
            )
        object.__setattr__(self, "terms", terms)

    @property
    def shape(self) -> Shape:
        return self.terms[0].shape

    @property
    def rank(self) -> int:
        return len(self.terms)

    @property
    def dim(self) -> int:
        """Manifold dimension m = r * segre_dim."""
        return self.rank * self.shape.segre_dim

    @cached_property
    def ambient_terms(self) -> np.ndarray:
        """r x N array of the vectorized terms."""
        return np.stack([t.ambient for t in self.terms])

    @property
    def ambient_vector(self) -> np.ndarray:
        return self.ambient_terms.reshape(-1)

    @classmethod
    def from_factors(cls, factors: Sequence[Sequence[Sequence[float]]]) -> "ProductPoint":
        """Build from nested lists [term][mode][entry]."""
        return cls(tuple(RankOnePoint(tuple(term)) for term in factors))


@dataclass(frozen=True, eq=False)
class TangentBlock:
    """Orthonormal basis U_i of the tangent space at one rank-1 term."""

    matrix: np.ndarray
    complements: Tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector: coordinates in the Terracini basis and per-term ambient parts."""

    coords: np.ndarray
    ambient_terms: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    @property
    def ambient_vector(self) -> np.ndarray:
        return self.ambient_terms.reshape(-1)

    def scaled(self, t: float) -> "TangentVector":
        return TangentVector(coords=t * self.coords, ambient_terms=t * self.ambient_terms)


@dataclass(frozen=True, eq=False)
class TangentBasis:
    """Terracini basis [U_1 ... U_r] of the tangent space at a product point."""

    blocks: Tuple[TangentBlock, ...]

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.hstack([b.matrix for b in self.blocks])

    @property
    def block_dim(self) -> int:
        return self.blocks[0].matrix.shape[1]

    @property
    def dim(self) -> int:
        return len(self.blocks) * self.block_dim

    def split(self, coords: np.ndarray) -> List[np.ndarray]:
        return np.split(np.asarray(coords, dtype=np.float64), len(self.blocks))

    def lift(self, coords) -> TangentVector:
        """Tangent vector with the given coordinates."""
        coords = np.asarray(coords, dtype=np.float64).reshape(-1)
        if coords.shape[0] != self.dim:
            raise InvalidInputError(f"expected {self.dim} tangent coordinates, got {coords.shape[0]}")
        ambient = np.stack([b.matrix @ c for b, c in zip(self.blocks, self.split(coords))])
        return TangentVector(coords=coords, ambient_terms=ambient)

    def project(self, delta) -> TangentVector:
        """Orthogonal projection of per-term ambient vectors."""
        n = self.blocks[0].matrix.shape[0]
        arr = np.asarray(delta, dtype=np.float64)
        if arr.size != len(self.blocks) * n:
            raise InvalidInputError(
                f"expected {len(self.blocks)} ambient vectors of length {n}, got {arr.shape}"
            )
        arr = arr.reshape(len(self.blocks), n)
        coords = np.concatenate([b.matrix.T @ d for b, d in zip(self.blocks, arr)])
        return self.lift(coords)


def tangent_basis(point: RankOnePoint) -> TangentBlock:
    """
    Terracini block of a rank-1 term.

    Columns are [a1^ x ... x ad^ | Q_1 x a2^ x ... x ad^ | ... | a1^ x ... x Q_d]
    with a^ = a/|a| and Q_k an orthonormal complement of a^(k).

    Args:
        point: Rank-1 term

    Returns:
        N x segre_dim block with orthonormal columns
    """
    units = point.unit_factors()
    complements = tuple(orthonormal_complement(u) for u in units)
    columns = [outer_vector(units)[:, None]]
    for k, q in enumerate(complements):
        mats = [u[:, None] for u in units]
        mats[k] = q
        columns.append(reduce(np.kron, mats))
    return TangentBlock(matrix=np.hstack(columns), complements=complements)


def product_tangent_basis(point: ProductPoint) -> TangentBasis:
    return TangentBasis(blocks=tuple(tangent_basis(t) for t in point.terms))


def tangent_vector(point: ProductPoint, coords) -> TangentVector:
    """Lift Terracini coordinates at `point` to a tangent vector."""
    return product_tangent_basis(point).lift(coords)


def project_ambient_to_tangent(point: ProductPoint, delta) -> TangentVector:
    """Project r ambient vectors onto the tangent space at `point`."""
    return product_tangent_basis(point).project(delta)


def _first_nonzero(vec: np.ndarray) -> float:
    nz = np.flatnonzero(vec)
    return float(vec[nz[0]]) if nz.size else 0.0


def canonical_factors(scale: float, units: Sequence[np.ndarray]) -> Tuple[np.ndarray, ...]:
    """
    Balanced, sign-fixed factors of scale * u_1 x ... x u_d.

    All factors get norm |scale|^(1/d); every factor but the last has a positive
    first nonzero entry and the last one absorbs the sign.
    """
    d = len(units)
    c = abs(scale) ** (1.0 / d)
    factors = [c * np.asarray(u, dtype=np.float64) for u in units]
    if scale < 0:
        factors[-1] = -factors[-1]
    for k in range(d - 1):
        if _first_nonzero(factors[k]) < 0:
            factors[k] = -factors[k]
            factors[-1] = -factors[-1]
    return tuple(factors)


def rank_one_hooi(
    tensor: np.ndarray,
    init: Sequence[np.ndarray],
    max_iters: int = DEFAULT_MAX_HOOI_ITERS,
    tol: float = DEFAULT_HOOI_TOL,
) -> RankOnePoint:
    """
    Rank-1 higher-order orthogonal iteration.

    Args:
        tensor: Dense array with the tensor's mode sizes
        init: Starting factors, one per mode
        max_iters: Sweep budget
        tol: Convergence threshold on the max-abs change of the unit factors

    Returns:
        Rank-1 approximation in canonical factor form
    """
    if not np.any(tensor):
        raise SingularStepError("retraction target is the zero tensor")

    d = tensor.ndim
    units = [np.asarray(u, dtype=np.float64) / np.linalg.norm(u) for u in init]
    unfoldings = [np.moveaxis(tensor, k, 0).reshape(tensor.shape[k], -1) for k in range(d)]

    for it in range(max_iters):
        change = 0.0
        for k in range(d):
            others = outer_vector([units[l] for l in range(d) if l != k])
            v = unfoldings[k] @ others
            nv = np.linalg.norm(v)
            if nv == 0.0:
                raise RetractionError(
                    f"mode-{k} contraction vanished in sweep {it}", iterate=tuple(units)
                )
            v = v / nv
            change = max(change, float(np.max(np.abs(v - units[k]))))
            units[k] = v
        if change <= tol:
            scale = float(outer_vector(units) @ tensor.reshape(-1))
            logger.debug(f"HOOI converged after {it + 1} sweeps")
            return RankOnePoint(canonical_factors(scale, units))

    raise RetractionError(
        f"rank-1 HOOI did not converge in {max_iters} sweeps (last change {change:.3e})",
        iterate=tuple(units),
    )


def retract(
    point: ProductPoint,
    eta: TangentVector,
    max_hooi_iters: int = DEFAULT_MAX_HOOI_ITERS,
    hooi_tol: float = DEFAULT_HOOI_TOL,
) -> ProductPoint:
    """
    Retraction: per-term rank-1 HOOI of ambient(p_i) + eta_i, started at p_i.

    Returns `point` itself for the zero tangent vector.
    """
    if not np.all(np.isfinite(eta.coords)) or not np.all(np.isfinite(eta.ambient_terms)):
        raise InvalidInputError("tangent vector has non-finite entries")
    if eta.ambient_terms.shape != point.ambient_terms.shape:
        raise InvalidInputError(
            f"tangent vector has shape {eta.ambient_terms.shape}, point has {point.ambient_terms.shape}"
        )
    if not np.any(eta.coords):
        return point

    dims = point.shape.mode_sizes
    terms = []
    for term, step in zip(point.terms, eta.ambient_terms):
        target = (term.ambient + step).reshape(dims)
        terms.append(rank_one_hooi(target, term.factors, max_hooi_iters, hooi_tol))
    return ProductPoint(tuple(terms))


def retraction_defect(
    point: ProductPoint,
    eta: TangentVector,
    t: float,
    max_hooi_iters: int = DEFAULT_MAX_HOOI_ITERS,
    hooi_tol: float = DEFAULT_HOOI_TOL,
) -> float:
    """|R(p, t eta) - p - t eta| over the concatenated ambient terms."""
    if t < 0:
        raise InvalidInputError(f"step t must be nonnegative, got {t}")
    if t == 0:
        return 0.0
    moved = retract(point, eta.scaled(t), max_hooi_iters, hooi_tol)
    diff = moved.ambient_terms - point.ambient_terms - t * eta.ambient_terms
    return float(np.linalg.norm(diff))
