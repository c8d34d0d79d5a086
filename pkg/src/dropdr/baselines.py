"""Comparison reducers: PAA, truncated DFT, and PCA fit on all of the data.

Each is wrapped in the same smallest-k binary search DROP uses, so the
reported dimensions are directly comparable.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .config import DEFAULT_CONFIDENCE, DEFAULT_PAIR_CAP
from .flops import FlopCounter, fft_flops
from .linalg import DimensionError, Transform, as_data_matrix
from .pca import ExactSvd, RandomizedSvd, pca_fit
from .search import Found, NotAchievable, SearchOutcome, search_probe, search_transform
from .tlb import PairSample, ReducerProbe, estimate_at


RANDOMIZED_START_RANK = 16


class ReducerKind(enum.Enum):
    PAA = "paa"
    FFT = "fft"
    FULL_PCA_EXACT = "pca-exact"
    FULL_PCA_RANDOMIZED = "pca-randomized"


def _check(X, k: int) -> np.ndarray:
    X = as_data_matrix(X)
    if not 1 <= k <= X.shape[1]:
        raise DimensionError(f"k must be in 1..{X.shape[1]}, got {k}")
    return X


def paa_frames(d: int, k: int) -> np.ndarray:
    """Start offsets of k contiguous frames covering 0..d-1; sizes differ by at most one."""
    return (np.arange(k) * d) // k


def paa_reduce(X, k: int) -> np.ndarray:
    """Piecewise aggregate approximation scaled to lower-bound Euclidean distance.

    Coordinate j is ``sqrt(n_j) * mean(frame_j)`` for a frame of n_j values,
    equivalently the frame sum over ``sqrt(n_j)``.
    """
    X = _check(X, k)
    starts = paa_frames(X.shape[1], k)
    sizes = np.diff(np.append(starts, X.shape[1]))
    return np.add.reduceat(X, starts, axis=1) / np.sqrt(sizes)


def fft_reduce(X, k: int) -> np.ndarray:
    """Leading k real coefficients of the orthonormal DFT of each row.

    The order is ``[c0, a1, b1, a2, b2, ...]`` with ``a_j = sqrt(2) Re(c_j)``
    and ``b_j = sqrt(2) Im(c_j)``; for even d the last coefficient is the
    real Nyquist term. The sqrt(2) accounts for the conjugate coefficient
    c_{d-j}, so keeping all d coordinates is an isometry.
    """
    X = _check(X, k)
    d = X.shape[1]
    c = np.fft.rfft(X, axis=1, norm="ortho")
    out = np.empty((X.shape[0], d))
    out[:, 0] = c[:, 0].real
    paired = (d - 1) // 2
    out[:, 1 : 2 * paired + 1 : 2] = math.sqrt(2) * c[:, 1 : paired + 1].real
    out[:, 2 : 2 * paired + 2 : 2] = math.sqrt(2) * c[:, 1 : paired + 1].imag
    if d % 2 == 0 and d > 1:
        out[:, d - 1] = c[:, d // 2].real
    return out[:, :k]


def reducer_basis(kind: ReducerKind, d: int, k: int) -> np.ndarray:
    """d x k matrix whose columns realize a PAA or DFT reducer as a projection."""
    reduce = {ReducerKind.PAA: paa_reduce, ReducerKind.FFT: fft_reduce}[kind]
    return reduce(np.eye(d), k)


def _flops_per_row(kind: ReducerKind, d: int):
    if kind is ReducerKind.PAA:
        return lambda k: float(d)
    return lambda k: fft_flops(1, d)


def smallest_k(
    reducer: ReducerKind,
    X,
    B: float,
    confidence: float = DEFAULT_CONFIDENCE,
    seed: int = 0,
    *,
    pair_cap: int = DEFAULT_PAIR_CAP,
    exact: bool = False,
    pairs: PairSample | None = None,
    counter: FlopCounter | None = None,
) -> SearchOutcome:
    """Smallest k in [1, d] meeting TLB target B for one reducer.

    PCA reducers are fit once on all of X. PAA and DFT reductions are
    recomputed at each probed k. All reducers share the seeded pair predicate
    of the DROP search.
    """
    X = as_data_matrix(X)
    m, d = X.shape
    if pairs is None:
        population = m * (m - 1) // 2
        pairs = PairSample(X, seed, population if exact else min(population, pair_cap), counter)
    if reducer in (ReducerKind.PAA, ReducerKind.FFT):
        reduce = paa_reduce if reducer is ReducerKind.PAA else fft_reduce
        probe = ReducerProbe(pairs, reduce, d, _flops_per_row(reducer, d))
        if B <= 0:
            est = estimate_at(probe, min(pairs.capacity, 100), 1, confidence)
            return Found(1, _reducer_transform(reducer, d, 1), est, 1)
        # PAA frames are only nested when one k divides the other, so its
        # TLB can dip as k grows
        k, trace = search_probe(probe, B, d, confidence, pair_cap, exact,
                                monotone=reducer is not ReducerKind.PAA)
        if k is None:
            return NotAchievable(trace.decisions[d].estimate, trace.evaluations)
        return Found(k, _reducer_transform(reducer, d, k), trace.decisions[k].estimate, trace.evaluations)

    k_full = min(m, d)
    if reducer is ReducerKind.FULL_PCA_RANDOMIZED:
        # a rank-k sketch is only cheap for small k: fit ranks 16, 32, ...
        # until one holds a passing truncation
        engine = RandomizedSvd()
        k_hi = min(RANDOMIZED_START_RANK, k_full - engine.oversample)
        while k_hi >= 1:
            fit = pca_fit(X, k_hi, engine, seed, counter)
            outcome = search_transform(fit, pairs, B, confidence, pair_cap, exact)
            if outcome.found:
                return outcome
            if k_hi >= k_full - engine.oversample:
                break
            k_hi = min(2 * k_hi, k_full - engine.oversample)
        # the sketch cannot reach full rank; finish with the exact fit
    fit = pca_fit(X, k_full, ExactSvd(), seed, counter)
    return search_transform(fit, pairs, B, confidence, pair_cap, exact)


def _reducer_transform(kind: ReducerKind, d: int, k: int) -> Transform:
    return Transform(np.zeros(d), reducer_basis(kind, d, k))
