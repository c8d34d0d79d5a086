"""PCA engines: exact SVD, randomized truncated SVD, and simultaneous iteration.

All engines return a :class:`~dropdr.linalg.Transform` whose columns are
ordered by non-increasing explained variance and sign-normalized with
:func:`~dropdr.linalg.fix_signs`, so fits from different engines can be
compared column by column.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .config import DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS
from .flops import FlopCounter, charge, matmul_flops, qr_flops, svd_flops
from .linalg import (
    DimensionError,
    SvdResult,
    Transform,
    as_data_matrix,
    center_columns,
    fix_signs,
    projector_distance,
    qr_orthonormalize,
    svd,
)


@dataclass(frozen=True)
class ExactSvd:
    name = "exact"


@dataclass(frozen=True)
class RandomizedSvd:
    oversample: int = DEFAULT_OVERSAMPLE
    power_iters: int = DEFAULT_POWER_ITERS
    name = "halko"

    def __post_init__(self):
        if self.oversample < 1:
            raise ValueError("oversample must be >= 1")
        if self.power_iters < 0:
            raise ValueError("power_iters must be >= 0")


@dataclass(frozen=True)
class SimultaneousIteration:
    block: int = 5
    tol: float = 1e-8
    max_sweeps: int = 200
    name = "subspace"

    def __post_init__(self):
        if self.block < 1:
            raise ValueError("block must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


PcaEngine = Union[ExactSvd, RandomizedSvd, SimultaneousIteration]


def engine_from_name(name: str) -> PcaEngine:
    engines = {"exact": ExactSvd, "halko": RandomizedSvd, "subspace": SimultaneousIteration}
    try:
        return engines[name]()
    except KeyError:
        raise ValueError(f"unknown engine {name!r}; expected one of {sorted(engines)}") from None


@dataclass(frozen=True)
class RefineConfig:
    """Threshold on singular values kept by :func:`refine`.

    ``eps=None`` means 1e-10 times the leading singular value.
    """

    eps: float | None = None

    def __post_init__(self):
        if self.eps is not None and self.eps <= 0:
            raise ValueError("eps must be positive")


class SubspaceResult(NamedTuple):
    Q: np.ndarray
    converged: bool
    sweeps: int


def _ritz_order(C: np.ndarray, Q: np.ndarray, counter: FlopCounter | None):
    """Rotate orthonormal Q so its columns follow the singular directions of C restricted to range(Q)."""
    CQ = C @ Q
    charge(counter, matmul_flops(C.shape[0], C.shape[1], Q.shape[1]))
    _, S, Wt = np.linalg.svd(CQ, full_matrices=False)
    charge(counter, svd_flops(*CQ.shape, left_vectors=False))
    return Q @ Wt.T, S


def halko_truncated_svd(
    A,
    k: int,
    oversample: int = DEFAULT_OVERSAMPLE,
    power_iters: int = DEFAULT_POWER_ITERS,
    seed: int = 0,
    counter: FlopCounter | None = None,
) -> SvdResult:
    """Randomized rank-k SVD with a Gaussian range finder and subspace power iterations.

    Each power iteration re-orthonormalizes with QR to keep the small
    singular directions from being washed out in floating point.

    Raises:
        DimensionError: if ``k + oversample`` exceeds the smaller dimension of ``A``.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    if k < 1:
        raise DimensionError("k must be >= 1")
    ell = k + oversample
    if ell > min(m, n):
        raise DimensionError(
            f"k + oversample = {ell} exceeds min(dims) = {min(m, n)} of a {m}x{n} matrix"
        )
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((n, ell))
    Y = A @ omega
    charge(counter, matmul_flops(m, n, ell))
    Q, _ = np.linalg.qr(Y)
    charge(counter, qr_flops(m, ell))
    for _ in range(power_iters):
        Z, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Z)
        charge(counter, 2 * matmul_flops(m, n, ell) + qr_flops(n, ell) + qr_flops(m, ell))
    Bm = Q.T @ A
    charge(counter, matmul_flops(ell, m, n))
    Ub, S, Vt = np.linalg.svd(Bm, full_matrices=False)
    charge(counter, svd_flops(ell, n) + matmul_flops(m, ell, ell))
    U = Q @ Ub
    return SvdResult(U[:, :k], S[:k], Vt[:k])


def simultaneous_iteration(
    A,
    k: int,
    tol: float = 1e-8,
    max_sweeps: int = 200,
    seed: int = 0,
    counter: FlopCounter | None = None,
) -> SubspaceResult:
    """Block power method for the leading k right singular directions of A.

    Starts from a random orthonormal d x k block and repeats
    ``Q <- qr(A^T A Q)`` until successive projectors differ by at most
    ``tol`` in Frobenius norm. On non-convergence the last iterate is
    returned with ``converged=False``. The final block is rotated within its
    span to the singular directions of ``A`` restricted to it.
    """
    A = np.asarray(A, dtype=np.float64)
    m, d = A.shape
    if not 1 <= k <= d:
        raise DimensionError(f"k must be in 1..{d}, got {k}")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    for sweep in range(1, max_sweeps + 1):
        Z = A.T @ (A @ Q)
        Q_next, _ = np.linalg.qr(Z)
        charge(counter, 2 * matmul_flops(m, d, k) + qr_flops(d, k) + matmul_flops(k, d, k))
        delta = projector_distance(Q, Q_next)
        Q = Q_next
        if delta <= tol:
            return SubspaceResult(_ritz_order(A, Q, counter)[0], True, sweep)
    return SubspaceResult(_ritz_order(A, Q, counter)[0], False, max_sweeps)


def project_off(A, V) -> np.ndarray:
    """Remove the components of A's rows along the orthonormal columns of V: ``A (I - V V^T)``."""
    A = np.asarray(A, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != A.shape[1]:
        raise DimensionError(f"V must have {A.shape[1]} rows, got shape {V.shape}")
    if V.shape[1] == 0:
        return A.copy()
    return A - (A @ V) @ V.T


def refine(A, V, cfg: RefineConfig = RefineConfig()) -> np.ndarray:
    """Compact a set of directions into an orthonormal basis ordered by A's energy.

    Directions of ``V`` that are numerically dependent are dropped, the rest
    are rotated to the singular directions of ``A Q``, and only directions
    whose singular value exceeds ``cfg.eps`` are kept.
    """
    A = np.asarray(A, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != A.shape[1]:
        raise DimensionError(f"V must have {A.shape[1]} rows, got shape {V.shape}")
    empty = np.zeros((A.shape[1], 0))
    if V.shape[1] == 0:
        return empty
    Q, _, padded = qr_orthonormalize(V)
    Q = Q[:, ~padded]
    if Q.shape[1] == 0:
        warnings.warn("refine: V has no independent columns", RuntimeWarning, stacklevel=2)
        return empty
    _, S, Wt = np.linalg.svd(A @ Q, full_matrices=False)
    eps = cfg.eps if cfg.eps is not None else 1e-10 * (S[0] if S.size else 0.0)
    keep = S > eps
    if not np.any(keep):
        warnings.warn(
            f"refine: no singular value exceeds eps={eps:g}; returning an empty basis",
            RuntimeWarning,
            stacklevel=2,
        )
        return empty
    return Q @ Wt.T[:, keep]


def _complete_basis(basis: np.ndarray, target: int) -> np.ndarray:
    """Extend orthonormal columns to ``target`` columns with standard-basis completions."""
    d, have = basis.shape
    if have >= target:
        return basis
    residual = np.eye(d) - basis @ basis.T
    # pick the coordinate axes least represented in range(basis)
    order = np.argsort(-np.einsum("ij,ij->j", residual, residual), kind="stable")
    extra = residual[:, order[: target - have]]
    Q, _ = np.linalg.qr(project_off(extra.T, basis).T)
    return np.hstack([basis, Q])


def pca_fit(
    sample,
    k_max: int,
    engine: PcaEngine | None = None,
    seed: int = 0,
    counter: FlopCounter | None = None,
) -> Transform:
    """Fit a k_max-component PCA transform on ``sample``.

    The basis holds the leading right singular vectors of the column-centered
    sample. When ``k_max`` exceeds the numerical rank of the centered sample,
    the trailing columns are orthonormal completions and ``Transform.padded``
    records how many.
    """
    sample = as_data_matrix(sample, "sample")
    n, d = sample.shape
    if not 1 <= k_max <= min(n, d):
        raise DimensionError(f"k_max must be in 1..{min(n, d)}, got {k_max}")
    engine = engine if engine is not None else ExactSvd()
    C, mean = center_columns(sample)
    charge(counter, 2.0 * n * d)

    if isinstance(engine, RandomizedSvd):
        oversample = min(engine.oversample, min(n, d) - k_max)
        if oversample < 1:
            basis, S = _exact_basis(C, k_max, counter)
        else:
            res = halko_truncated_svd(C, k_max, oversample, engine.power_iters, seed, counter)
            basis, S = res.Vt.T, res.S
    elif isinstance(engine, SimultaneousIteration):
        basis, S = _subspace_basis(C, k_max, engine, seed, counter)
    elif isinstance(engine, ExactSvd):
        basis, S = _exact_basis(C, k_max, counter)
    else:
        raise TypeError(f"unsupported engine {engine!r}")

    scale = S[0] if S.size and S[0] > 0 else 1.0
    rank = int(np.sum(S > 1e-10 * scale)) if S.size and S[0] > 0 else 0
    padded = k_max - min(rank, k_max)
    if padded:
        basis = _complete_basis(basis[:, : k_max - padded], k_max)
    return Transform(mean, fix_signs(basis), padded, S[:k_max])


def _exact_basis(C, k, counter):
    res = svd(C)
    charge(counter, svd_flops(*C.shape, left_vectors=True))
    return res.Vt[:k].T, res.S[:k]


def _subspace_basis(C, k, engine: SimultaneousIteration, seed, counter):
    """Grow the basis ``block`` directions at a time, deflating converged ones."""
    blocks = []
    found = 0
    residual = C
    rng = np.random.default_rng(seed)
    while found < k:
        width = min(engine.block, k - found)
        res = simultaneous_iteration(
            residual, width, engine.tol, engine.max_sweeps, int(rng.integers(2**31)), counter
        )
        blocks.append(res.Q)
        found += width
        V = np.hstack(blocks)
        residual = project_off(C, V)
        charge(counter, 2 * matmul_flops(C.shape[0], C.shape[1], V.shape[1]))
    V = np.hstack(blocks)
    Q, _ = np.linalg.qr(V)
    basis, S = _ritz_order(C, Q, counter)
    return basis, S
