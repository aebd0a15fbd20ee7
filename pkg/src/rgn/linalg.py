"""Dense linear algebra helpers: SVD, pseudoinverse solves, complements."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import svd

from . import InvalidInputError


logger = logging.getLogger(__name__)

EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True, eq=False)
class SvdFactors:
    """Compact SVD A = left @ diag(singular_values) @ right.T."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    @property
    def rank_tol(self) -> float:
        rows, cols = self.left.shape[0], self.right.shape[0]
        sigma_max = float(self.singular_values[0]) if self.singular_values.size else 0.0
        return max(rows, cols) * EPS * sigma_max

    def numerical_rank(self) -> int:
        return int(np.count_nonzero(self.singular_values > self.rank_tol))


def as_matrix(a) -> np.ndarray:
    """Validate and convert to a finite float64 2-D array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got array with shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("matrix contains non-finite entries")
    return arr


def compact_svd(a) -> SvdFactors:
    """
    Compact singular value decomposition.

    Args:
        a: n x p real matrix

    Returns:
        Factors with k = min(n, p) singular values in nonincreasing order
    """
    arr = as_matrix(a)
    u, s, vt = svd(arr, full_matrices=False, lapack_driver="gesvd", check_finite=False)
    return SvdFactors(left=u, singular_values=s, right=vt.T)


def pinv_from_factors(factors: SvdFactors, rank: Optional[int] = None) -> np.ndarray:
    """
    Moore-Penrose pseudoinverse from precomputed factors.

    Args:
        factors: Compact SVD of the matrix
        rank: Keep exactly this many singular values; default is the numerical rank

    Returns:
        The p x n pseudoinverse
    """
    k = factors.numerical_rank() if rank is None else rank
    v = factors.right[:, :k]
    u = factors.left[:, :k]
    return (v / factors.singular_values[:k]) @ u.T


def pinv_apply(a, b) -> np.ndarray:
    """
    Minimal-norm least-squares solution of a @ x = b.

    Singular values at or below max(rows, cols) * eps * sigma_max count as zero.
    """
    arr = as_matrix(a)
    rhs = np.asarray(b, dtype=np.float64).reshape(-1)
    if rhs.shape[0] != arr.shape[0]:
        raise InvalidInputError(
            f"right-hand side has length {rhs.shape[0]}, matrix has {arr.shape[0]} rows"
        )
    factors = compact_svd(arr)
    k = factors.numerical_rank()
    if k == 0:
        return np.zeros(arr.shape[1])
    coeffs = (factors.left[:, :k].T @ rhs) / factors.singular_values[:k]
    return factors.right[:, :k] @ coeffs


def smallest_singular_value(a) -> float:
    """The cols-th singular value of a tall matrix."""
    arr = as_matrix(a)
    if arr.shape[1] > arr.shape[0]:
        raise InvalidInputError(
            f"smallest_singular_value needs cols <= rows, got {arr.shape[0]}x{arr.shape[1]}"
        )
    return float(compact_svd(arr).singular_values[-1])


def spectral_norm(a) -> float:
    """Largest singular value; zero for an empty or zero matrix."""
    arr = as_matrix(a)
    if arr.size == 0:
        return 0.0
    return float(compact_svd(arr).singular_values[0])


def orthonormal_complement(v) -> np.ndarray:
    """
    Orthonormal basis of the orthogonal complement of v.

    Built from the Householder reflector that maps v/|v| to a multiple of e_1,
    so the result is a deterministic function of v.

    Args:
        v: Nonzero vector of length n

    Returns:
        n x (n-1) matrix with orthonormal columns orthogonal to v
    """
    vec = np.asarray(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(vec)):
        raise InvalidInputError("vector contains non-finite entries")
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise InvalidInputError("cannot complement the zero vector")

    unit = vec / norm
    w = unit.copy()
    w[0] += 1.0 if unit[0] >= 0 else -1.0
    reflector = np.eye(vec.shape[0]) - 2.0 * np.outer(w, w) / (w @ w)
    # reflector @ e_1 = -sign(v_1) v/|v|, the other columns span the complement
    return reflector[:, 1:]
