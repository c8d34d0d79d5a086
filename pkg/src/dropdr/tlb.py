"""Tightness of lower bounds (TLB): exact and sampled evaluation.

TLB is the mean, over unordered point pairs, of the reduced-space distance
divided by the original distance. For a contractive reduction every ratio
lies in [0, 1].

Sampled evaluation works on a :class:`PairSample`, a seeded random ordering
of distinct pairs whose prefixes are uniform samples without replacement.
Growing the sample therefore only appends pairs, and every dimension probed
during a search sees the same pairs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import norm

from .config import DEFAULT_CONFIDENCE, DEFAULT_PAIR_CAP, INITIAL_PAIRS, TOL
from .flops import FlopCounter, charge
from .linalg import DimensionError, Transform, as_data_matrix
from .sampling import distinct_draw


@dataclass(frozen=True)
class TlbEstimate:
    mean: float
    lo: float
    hi: float
    confidence: float
    pairs_used: int

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi


class Verdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class TlbDecision:
    verdict: Verdict
    estimate: TlbEstimate

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS


def z_value(confidence: float) -> float:
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    return float(norm.ppf(0.5 + confidence / 2.0))


def clean_ratios(reduced: np.ndarray, original: np.ndarray) -> np.ndarray:
    """Distance ratios with coincident pairs counted as 1, clipped to [0, 1]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(original > 0, reduced / np.where(original > 0, original, 1.0), 1.0)
    r = np.minimum(r, 1.0)
    r[r >= 1.0 - TOL.ratio_snap] = 1.0
    return r


def _check_k(T: Transform, k: int) -> None:
    if not 1 <= k <= T.k:
        raise DimensionError(f"k must be in 1..{T.k}, got {k}")


# chunked Gram-matrix path above this many pairs; the direct path is exact to rounding
_DIRECT_PAIR_LIMIT = 5_000_000


def tlb_exact(X, T: Transform, k: int) -> float:
    """Exact TLB of ``T`` truncated to ``k`` columns over all pairs of rows of X."""
    X = as_data_matrix(X)
    m = X.shape[0]
    if m < 2:
        raise ValueError("TLB needs at least two points")
    if X.shape[1] != T.d:
        raise DimensionError(f"data has {X.shape[1]} columns, transform expects {T.d}")
    _check_k(T, k)
    Z = (X - T.mean) @ T.basis[:, :k]
    if m * (m - 1) // 2 <= _DIRECT_PAIR_LIMIT:
        return float(np.mean(clean_ratios(pdist(Z), pdist(X))))
    return _tlb_exact_blocked(X - X.mean(axis=0), Z)


def _tlb_exact_blocked(C: np.ndarray, Z: np.ndarray, block: int = 512) -> float:
    m = C.shape[0]
    sq_c = np.einsum("ij,ij->i", C, C)
    sq_z = np.einsum("ij,ij->i", Z, Z)
    total = 0.0
    for start in range(0, m - 1, block):
        stop = min(start + block, m - 1)
        rows = slice(start, stop)
        cols = slice(start + 1, m)
        d_orig = sq_c[rows, None] + sq_c[None, cols] - 2.0 * (C[rows] @ C[cols].T)
        d_red = sq_z[rows, None] + sq_z[None, cols] - 2.0 * (Z[rows] @ Z[cols].T)
        ratios = clean_ratios(np.sqrt(np.maximum(d_red, 0.0)), np.sqrt(np.maximum(d_orig, 0.0)))
        # keep only j > i inside the block-row
        offs = np.arange(start, stop)[:, None] - np.arange(start + 1, m)[None, :]
        total += float(ratios[offs < 0].sum())
    return total / (m * (m - 1) / 2.0)


def condensed_to_pairs(codes: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Map condensed pair indices (row-major over i < j) to (i, j)."""
    c = np.asarray(codes, dtype=np.int64)
    b = 2 * m - 1
    i = np.floor((b - np.sqrt(np.maximum(b * b - 8.0 * c, 0.0))) / 2.0).astype(np.int64)
    i = np.clip(i, 0, m - 2)

    def start(r):
        return r * m - r * (r + 1) // 2

    # correct floating-point rounding in the square root
    i = np.where(start(i) > c, i - 1, i)
    i = np.where(start(i + 1) <= c, i + 1, i)
    j = c - start(i) + i + 1
    return i, j


class PairSample:
    """Seeded random pairs of rows of X with lazily cached difference vectors.

    Args:
        X: data matrix.
        seed: RNG seed for the pair draw.
        capacity: number of pairs drawn. At most ``m(m-1)/2`` when drawing
            without replacement; larger values switch to drawing with
            replacement.
    """

    def __init__(self, X, seed: int = 0, capacity: int = DEFAULT_PAIR_CAP,
                 counter: FlopCounter | None = None, validate: bool = True):
        # callers holding an already validated matrix skip the O(m d) scan
        self.X = as_data_matrix(X) if validate else X
        m = self.X.shape[0]
        if m < 2:
            raise ValueError("TLB needs at least two points")
        self.population = m * (m - 1) // 2
        self.replace = capacity > self.population
        rng = np.random.default_rng(seed)
        if self.replace:
            codes = rng.integers(0, self.population, size=capacity)
        else:
            codes = distinct_draw(rng, self.population, capacity)
        self.i, self.j = condensed_to_pairs(codes, m)
        self.capacity = capacity
        self.counter = counter
        self._diffs = np.empty((0, self.X.shape[1]))
        self._orig = np.empty(0)

    def _grow(self, p: int) -> None:
        have = self._orig.shape[0]
        if p <= have:
            return
        D = self.X[self.i[have:p]] - self.X[self.j[have:p]]
        self._diffs = np.vstack([self._diffs, D])
        self._orig = np.concatenate([self._orig, np.linalg.norm(D, axis=1)])
        charge(self.counter, 3.0 * (p - have) * self.X.shape[1])

    def diffs(self, p: int) -> np.ndarray:
        self._grow(p)
        return self._diffs[:p]

    def original(self, p: int) -> np.ndarray:
        self._grow(p)
        return self._orig[:p]

    def exhaustive(self, p: int) -> bool:
        return not self.replace and p >= self.population


class TransformProbe:
    """Per-pair ratios for every truncation of one transform, computed once per pair."""

    def __init__(self, pairs: PairSample, T: Transform, k_hi: int | None = None):
        if pairs.X.shape[1] != T.d:
            raise DimensionError(f"data has {pairs.X.shape[1]} columns, transform expects {T.d}")
        self.pairs = pairs
        self.basis = T.basis[:, : (k_hi or T.k)]
        self._cum = np.empty((0, self.basis.shape[1]))

    @property
    def k_max(self) -> int:
        return self.basis.shape[1]

    def ratios(self, p: int, k: int) -> np.ndarray:
        if not 1 <= k <= self.k_max:
            raise DimensionError(f"k must be in 1..{self.k_max}, got {k}")
        have = self._cum.shape[0]
        if p > have:
            D = self.pairs.diffs(p)[have:]
            proj = D @ self.basis
            self._cum = np.vstack([self._cum, np.cumsum(proj * proj, axis=1)])
            charge(self.pairs.counter, 2.0 * D.shape[0] * D.shape[1] * self.k_max + 2.0 * D.shape[0] * self.k_max)
        reduced = np.sqrt(self._cum[:p, k - 1])
        return clean_ratios(reduced, self.pairs.original(p))


class ReducerProbe:
    """Per-pair ratios for a linear reducer ``reduce(rows, k)`` re-applied for each k."""

    def __init__(self, pairs: PairSample, reduce: Callable[[np.ndarray, int], np.ndarray],
                 k_max: int, flops_per_row: Callable[[int], float] | None = None):
        self.pairs = pairs
        self.reduce = reduce
        self.k_max = k_max
        self.flops_per_row = flops_per_row
        self._cache: dict[int, np.ndarray] = {}

    def ratios(self, p: int, k: int) -> np.ndarray:
        cached = self._cache.get(k)
        if cached is None or cached.shape[0] < p:
            D = self.pairs.diffs(p)
            cached = np.linalg.norm(self.reduce(D, k), axis=1)
            self._cache[k] = cached
            if self.flops_per_row is not None:
                charge(self.pairs.counter, p * self.flops_per_row(k))
        return clean_ratios(cached[:p], self.pairs.original(p))


def summarize(ratios: np.ndarray, confidence: float, population: int | None) -> TlbEstimate:
    """Mean and two-sided normal-approximation interval of sampled ratios.

    ``population`` is the number of distinct pairs when the ratios were
    sampled without replacement (enables the finite-population correction),
    or None for sampling with replacement.
    """
    p = ratios.shape[0]
    mean = float(np.mean(ratios))
    if p < 2:
        half = 0.0
    else:
        s = float(np.std(ratios, ddof=1))
        fpc = 1.0
        if population is not None:
            fpc = np.sqrt(max(population - p, 0) / (population - 1)) if population > 1 else 0.0
        half = z_value(confidence) * s / np.sqrt(p) * fpc
    lo = max(0.0, mean - half)
    hi = min(1.0, mean + half)
    return TlbEstimate(mean, min(lo, mean), max(hi, mean), confidence, p)


def estimate_at(probe, p: int, k: int, confidence: float) -> TlbEstimate:
    pairs = probe.pairs
    return summarize(probe.ratios(p, k), confidence, None if pairs.replace else pairs.population)


def judge(est: TlbEstimate, B: float) -> Verdict | None:
    """PASS/FAIL when the interval clears the target, None while it straddles it.

    A zero-width interval is an exact observation and passes when it meets
    the target, so B = 1 is attainable by an isometry.
    """
    if est.lo > B or (est.degenerate and est.lo >= B):
        return Verdict.PASS
    if est.hi < B:
        return Verdict.FAIL
    return None


def decide(probe, B: float, k: int, confidence: float = DEFAULT_CONFIDENCE,
           pair_cap: int = DEFAULT_PAIR_CAP) -> TlbDecision:
    """Adaptive pair doubling starting from 100 pairs until the interval clears B."""
    limit = min(probe.pairs.population, pair_cap, probe.pairs.capacity)
    p = min(INITIAL_PAIRS, limit)
    while True:
        est = estimate_at(probe, p, k, confidence)
        verdict = judge(est, B)
        if verdict is not None:
            return TlbDecision(verdict, est)
        if p >= limit:
            return TlbDecision(Verdict.INCONCLUSIVE, est)
        p = min(2 * p, limit)


def tlb_sampled(X, T: Transform, k: int, pairs: int, confidence: float = DEFAULT_CONFIDENCE,
                seed: int = 0) -> TlbEstimate:
    """TLB estimate from ``pairs`` random pairs with a normal-approximation interval.

    Pairs are distinct while ``pairs`` does not exceed the number of distinct
    pairs, and drawn with replacement beyond that.
    """
    if pairs < 2:
        raise ValueError("pairs must be >= 2")
    z_value(confidence)
    X = as_data_matrix(X)
    _check_k(T, k)
    m = X.shape[0]
    population = m * (m - 1) // 2
    capacity = pairs if pairs > population else min(population, max(pairs, DEFAULT_PAIR_CAP))
    sample = PairSample(X, seed, capacity)
    return estimate_at(TransformProbe(sample, T, k), pairs, k, confidence)


def evaluate_tlb(X, T: Transform, B: float, k: int, confidence: float = DEFAULT_CONFIDENCE,
                 seed: int = 0, pair_cap: int = DEFAULT_PAIR_CAP) -> TlbDecision:
    """Decide whether ``T`` truncated to ``k`` columns meets TLB target ``B`` on X."""
    if not 0.0 < B <= 1.0:
        raise ValueError(f"B must be in (0, 1], got {B}")
    X = as_data_matrix(X)
    _check_k(T, k)
    m = X.shape[0]
    sample = PairSample(X, seed, min(m * (m - 1) // 2, max(pair_cap, INITIAL_PAIRS)))
    return decide(TransformProbe(sample, T, k), B, k, confidence, pair_cap)
