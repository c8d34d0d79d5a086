"""Dense matrix primitives: validation, centering, projection, QR and SVD.

A data matrix is a plain 2-D float64 ``numpy.ndarray`` whose rows are data
points. :func:`as_data_matrix` is the single validation gate; everything
downstream assumes its invariants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import TOL


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


def as_data_matrix(X, name: str = "X") -> np.ndarray:
    """Validate and return ``X`` as an m x d float64 array (m, d >= 1, all finite)."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return A


@dataclass(frozen=True)
class Transform:
    """Affine projection ``x -> (x - mean) @ basis`` onto orthonormal columns.

    ``padded`` counts trailing basis columns that are arbitrary orthonormal
    completions rather than data directions (fits that asked for more
    components than the sample's rank).
    """

    mean: np.ndarray
    basis: np.ndarray
    padded: int = 0
    singular_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        basis = np.asarray(self.basis, dtype=np.float64)
        if basis.ndim != 2:
            raise DimensionError("basis must be 2-D")
        if basis.shape[0] != mean.shape[0]:
            raise DimensionError(
                f"mean has length {mean.shape[0]} but basis has {basis.shape[0]} rows"
            )
        if not 1 <= basis.shape[1] <= basis.shape[0]:
            raise DimensionError(f"basis must have 1..{basis.shape[0]} columns, got {basis.shape[1]}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def truncate(self, j: int) -> "Transform":
        if not 1 <= j <= self.k:
            raise DimensionError(f"cannot truncate a {self.k}-column transform to {j}")
        sv = None if self.singular_values is None else self.singular_values[:j]
        return Transform(self.mean, self.basis[:, :j], max(0, self.padded - (self.k - j)), sv)

    def apply(self, X) -> np.ndarray:
        return apply_transform(X, self)

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


class SvdResult(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    Vt: np.ndarray


def center_columns(X) -> tuple[np.ndarray, np.ndarray]:
    X = as_data_matrix(X)
    mean = X.mean(axis=0)
    return X - mean, mean


def apply_transform(X, T: Transform) -> np.ndarray:
    X = as_data_matrix(X)
    if X.shape[1] != T.d:
        raise DimensionError(f"data has {X.shape[1]} columns, transform expects {T.d}")
    return (X - T.mean) @ T.basis


def qr_orthonormalize(A) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin Householder QR.

    Returns ``(Q, R, padded)``. ``Q`` always has as many orthonormal columns
    as ``A``; ``padded[j]`` is True when column j of ``A`` was numerically
    dependent on the preceding ones, in which case ``Q[:, j]`` is a completion
    direction outside ``range(A)``.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise DimensionError(f"QR needs a tall or square matrix, got shape {A.shape}")
    if A.shape[1] == 0:
        return A.copy(), np.zeros((0, 0)), np.zeros(0, dtype=bool)
    Q, R = np.linalg.qr(A, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = R * signs[:, None]
    diag = np.abs(np.diag(R))
    scale = max(float(np.max(np.linalg.norm(A, axis=0))), np.finfo(float).tiny)
    padded = diag <= TOL.rank_rtol * scale
    return Q, R, padded


def svd(A, truncate_to: int | None = None) -> SvdResult:
    """Thin SVD with singular values in non-increasing order."""
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise ValueError("svd input contains NaN or Inf entries")
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    if truncate_to is not None:
        if not 1 <= truncate_to <= S.shape[0]:
            raise DimensionError(f"truncate_to must be in 1..{S.shape[0]}, got {truncate_to}")
        U, S, Vt = U[:, :truncate_to], S[:truncate_to], Vt[:truncate_to]
    return SvdResult(U, S, Vt)


def fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    if basis.shape[1] == 0:
        return basis
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def projector_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius distance between the orthogonal projectors onto range(A) and range(B).

    Both inputs must have orthonormal columns. Uses the residual form
    ``||P_A - P_B||^2 = ||B - A A^T B||^2 + ||A - B B^T A||^2``, which avoids
    the cancellation in ``ka + kb - 2 ||A^T B||^2`` for nearby subspaces.
    """
    cross = A.T @ B
    r1 = np.linalg.norm(B - A @ cross)
    r2 = np.linalg.norm(A - B @ cross.T)
    return float(np.hypot(r1, r2))


def orthonormality_error(Q: np.ndarray) -> float:
    return float(np.linalg.norm(Q.T @ Q - np.eye(Q.shape[1])))
