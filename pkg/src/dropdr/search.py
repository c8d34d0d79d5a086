"""Smallest TLB-preserving dimension by binary search over nested truncations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

from .config import DEFAULT_CONFIDENCE, DEFAULT_PAIR_CAP, INITIAL_PAIRS
from .flops import FlopCounter
from .linalg import DimensionError, Transform, as_data_matrix
from .pca import PcaEngine, pca_fit
from .tlb import (
    PairSample,
    TlbDecision,
    TlbEstimate,
    TransformProbe,
    Verdict,
    decide,
    estimate_at,
    judge,
    summarize,
)


@dataclass(frozen=True)
class Found:
    k: int
    transform: Transform
    tlb: TlbEstimate
    evaluations: int = 0

    found = True


@dataclass(frozen=True)
class NotAchievable:
    best_estimate: TlbEstimate
    evaluations: int = 0

    found = False


SearchOutcome = Union[Found, NotAchievable]


@dataclass
class SearchTrace:
    """Decisions made during one search, keyed by probed k."""

    decisions: dict[int, TlbDecision] = field(default_factory=dict)

    @property
    def evaluations(self) -> int:
        return len(self.decisions)


def smallest_passing(k_hi: int, predicate: Callable[[int], bool]) -> int | None:
    """Smallest k in [1, k_hi] with ``predicate(k)``, assuming monotonicity.

    ``k_hi`` is probed first; if it fails the search gives up and returns
    None. At most ``ceil(log2(k_hi)) + 1`` probes are made.
    """
    if k_hi < 1:
        raise ValueError("k_hi must be >= 1")
    if not predicate(k_hi):
        return None
    lo, hi = 1, k_hi
    while lo < hi:
        mid = (lo + hi) // 2
        if predicate(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def linear_scan(k_hi: int, predicate: Callable[[int], bool]) -> int | None:
    for k in range(1, k_hi + 1):
        if predicate(k):
            return k
    return None


def search_probe(probe, B: float, k_hi: int, confidence: float = DEFAULT_CONFIDENCE,
                 pair_cap: int = DEFAULT_PAIR_CAP, exact: bool = False,
                 trace: SearchTrace | None = None,
                 monotone: bool = True) -> tuple[int | None, SearchTrace]:
    """Binary search with a TLB predicate; Inconclusive decisions count as failures.

    With ``exact=True`` every probe uses all pairs of the sample (which must
    then be exhaustive), giving a deterministic exact-TLB predicate. Probes
    whose TLB is not monotone in k (``monotone=False``) are scanned upward
    from k = 1 instead, since bisection can step over the smallest passing k.
    """
    trace = trace if trace is not None else SearchTrace()
    cap = probe.pairs.population if exact else pair_cap

    def passes(k: int) -> bool:
        if k not in trace.decisions:
            if exact:
                trace.decisions[k] = _exact_decision(probe, B, k, confidence)
            else:
                trace.decisions[k] = decide(probe, B, k, confidence, cap)
        return trace.decisions[k].passed

    if not monotone:
        return linear_scan(k_hi, passes), trace
    return smallest_passing(k_hi, passes), trace


def _exact_decision(probe, B, k, confidence) -> TlbDecision:
    p = probe.pairs.population
    if not probe.pairs.exhaustive(p) or probe.pairs.capacity < p:
        raise ValueError("exact evaluation needs a pair sample holding every pair")
    est = summarize(probe.ratios(p, k), confidence, p)
    verdict = judge(est, B) or Verdict.INCONCLUSIVE
    return TlbDecision(verdict, est)


def exhaustive_pairs(X, counter: FlopCounter | None = None) -> PairSample:
    m = as_data_matrix(X).shape[0]
    return PairSample(X, 0, m * (m - 1) // 2, counter)


def compute_transform(
    X,
    sample,
    B: float,
    k_hi: int,
    engine: PcaEngine | None = None,
    confidence: float = DEFAULT_CONFIDENCE,
    seed: int = 0,
    pair_cap: int = DEFAULT_PAIR_CAP,
    pairs: PairSample | None = None,
    exact: bool = False,
    counter: FlopCounter | None = None,
) -> SearchOutcome:
    """Fit PCA on ``sample`` once at ``k_hi`` and find the smallest passing truncation.

    TLB is always judged on the full data ``X``. All probed dimensions share
    one pair sample (``pairs``, or one drawn from ``seed``), which keeps the
    empirical predicate monotone in k.
    """
    X = as_data_matrix(X)
    sample = as_data_matrix(sample, "sample")
    if sample.shape[1] != X.shape[1]:
        raise DimensionError("sample and X must have the same number of columns")
    if not 1 <= k_hi <= min(sample.shape):
        raise DimensionError(f"k_hi must be in 1..{min(sample.shape)}, got {k_hi}")
    fit = pca_fit(sample, k_hi, engine, seed, counter)
    if pairs is None:
        pairs = exhaustive_pairs(X, counter) if exact else PairSample(X, seed, _capacity(X, pair_cap), counter)
    return search_transform(fit, pairs, B, confidence, pair_cap, exact)


def _capacity(X, pair_cap: int) -> int:
    m = X.shape[0]
    return min(m * (m - 1) // 2, pair_cap)


def search_transform(fit: Transform, pairs: PairSample, B: float,
                     confidence: float = DEFAULT_CONFIDENCE, pair_cap: int = DEFAULT_PAIR_CAP,
                     exact: bool = False, k_hi: int | None = None) -> SearchOutcome:
    """Binary-search the truncations of an already fitted transform."""
    k_hi = k_hi or fit.k
    probe = TransformProbe(pairs, fit, k_hi)
    if B <= 0:
        # vacuous target: report k = 1 with its estimate
        p = pairs.population if exact else min(INITIAL_PAIRS, pairs.capacity)
        return Found(1, fit.truncate(1), estimate_at(probe, p, 1, confidence), 1)
    k, trace = search_probe(probe, B, k_hi, confidence, pair_cap, exact)
    if k is None:
        return NotAchievable(trace.decisions[k_hi].estimate, trace.evaluations)
    return Found(k, fit.truncate(k), trace.decisions[k].estimate, trace.evaluations)
