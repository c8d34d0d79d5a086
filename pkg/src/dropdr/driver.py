"""The progressive-sampling DROP loop.

Each iteration draws a fresh uniform sample, fits PCA on it, finds the
smallest truncation whose TLB on the full data meets the target, and then
decides whether another, larger sample is worth its predicted cost: the loop
stops once the predicted downstream saving ``C(k_i) - C(k_next)`` falls below
the predicted cost ``r_next`` of the next iteration.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .config import DEFAULT_CONFIDENCE, DEFAULT_FLOP_SECONDS, DEFAULT_PAIR_CAP
from .flops import FlopCounter, charge, svd_flops
from .linalg import DimensionError, Transform, as_data_matrix, fix_signs, svd
from .pca import PcaEngine, RandomizedSvd, pca_fit
from .sampling import distinct_draw
from .search import Found, SearchOutcome, search_transform
from .tlb import PairSample, TlbEstimate

log = logging.getLogger(__name__)

CostFn = Callable[[float], float]


@dataclass(frozen=True)
class PercentLinear:
    start_frac: float = 0.01
    step_frac: float = 0.01

    def __post_init__(self):
        _check_frac(self.start_frac, self.step_frac)


@dataclass(frozen=True)
class FixedStep:
    start_n: int = 500
    step_n: int = 500

    def __post_init__(self):
        if self.start_n < 1 or self.step_n < 1:
            raise ValueError("fixed schedule sizes must be >= 1")


@dataclass(frozen=True)
class Escalating:
    """Percentage schedule whose step grows by ``escalation_factor`` after a stall.

    A stall is ``stall_threshold`` consecutive iterations without a smaller k.
    """

    start_frac: float = 0.01
    step_frac: float = 0.01
    escalation_factor: float = 2.0
    stall_threshold: int = 3

    def __post_init__(self):
        _check_frac(self.start_frac, self.step_frac)
        if self.escalation_factor <= 1:
            raise ValueError("escalation_factor must be > 1")
        if self.stall_threshold < 1:
            raise ValueError("stall_threshold must be >= 1")


SampleSchedule = Union[PercentLinear, FixedStep, Escalating]


def _check_frac(*fracs):
    for f in fracs:
        if not 0 < f <= 1:
            raise ValueError(f"schedule fractions must be in (0, 1], got {f}")


def parse_schedule(text: str) -> SampleSchedule:
    """Parse ``pct:START:STEP``, ``fixed:START:STEP`` or ``esc:START:STEP:FACTOR:STALL``."""
    kind, *args = text.split(":")
    try:
        if kind == "pct" and len(args) == 2:
            return PercentLinear(float(args[0]), float(args[1]))
        if kind == "fixed" and len(args) == 2:
            return FixedStep(int(args[0]), int(args[1]))
        if kind == "esc" and len(args) == 4:
            return Escalating(float(args[0]), float(args[1]), float(args[2]), int(args[3]))
    except ValueError as exc:
        raise ValueError(f"bad schedule {text!r}: {exc}") from None
    raise ValueError(f"bad schedule {text!r}; expected pct:S:T, fixed:S:T or esc:S:T:F:N")


def format_schedule(s: SampleSchedule) -> str:
    if isinstance(s, PercentLinear):
        return f"pct:{s.start_frac:g}:{s.step_frac:g}"
    if isinstance(s, FixedStep):
        return f"fixed:{s.start_n}:{s.step_n}"
    return f"esc:{s.start_frac:g}:{s.step_frac:g}:{s.escalation_factor:g}:{s.stall_threshold}"


class Termination(enum.Enum):
    COST_OPTIMAL = "cost-optimal"
    CONVERGED = "converged"
    SAMPLE_EXHAUSTED = "sample-exhausted"
    NEVER_ACHIEVED = "never-achieved"


@dataclass(frozen=True)
class IterationRecord:
    i: int
    m_i: int
    k_i: Optional[int]
    r_i: float
    obj_i: Optional[float] = None
    tlb: Optional[TlbEstimate] = None
    source: Optional[str] = None  # "fresh" or "distilled" when k_i was found


@dataclass
class DropResult:
    transform: Optional[Transform]
    k: Optional[int]
    history: list[IterationRecord]
    total_dr_seconds: float
    termination: Termination
    tlb: Optional[TlbEstimate] = None

    @property
    def sampled_rows(self) -> int:
        return sum(h.m_i for h in self.history)


@dataclass
class WorkReuseState:
    """History of past bases, concatenated column-wise."""

    enabled: bool = True
    H: Optional[np.ndarray] = None
    shrink_limit: int = 64


def _ceil(x: float) -> int:
    # guard against 0.01 + 2 * 0.01 landing a hair above 0.03
    return int(math.ceil(x - 1e-9))


def _stalls(history: Sequence[IterationRecord]) -> list[int]:
    """Running count of consecutive non-improving iterations after each record."""
    best = math.inf
    run = 0
    out = []
    for h in history:
        if h.k_i is not None and h.k_i < best:
            best = h.k_i
            run = 0
        else:
            run += 1
        out.append(run)
    return out


def schedule_next(schedule: SampleSchedule, i: int, m: int,
                  history: Sequence[IterationRecord] = ()) -> int:
    """Sample size for iteration ``i`` (1-based), clamped to [previous + 1, m]."""
    if i < 1:
        raise ValueError("iterations are numbered from 1")
    prev = history[-1].m_i if history else 0
    if isinstance(schedule, PercentLinear):
        raw = _ceil(m * (schedule.start_frac + (i - 1) * schedule.step_frac))
    elif isinstance(schedule, FixedStep):
        raw = schedule.start_n + (i - 1) * schedule.step_n
    elif isinstance(schedule, Escalating):
        if i == 1 or not history:
            raw = _ceil(m * schedule.start_frac)
        else:
            escalations = 0
            run = 0
            for stall in _stalls(history):
                run = stall
                if run and run % schedule.stall_threshold == 0:
                    escalations += 1
            step = m * schedule.step_frac * schedule.escalation_factor**escalations
            raw = prev + _ceil(step)
    else:
        raise TypeError(f"unknown schedule {schedule!r}")
    return int(min(max(raw, prev + 1, 1), m))


def draw_sample(X, n: int, seed: int) -> np.ndarray:
    """``n`` distinct rows of X chosen uniformly at random."""
    X = as_data_matrix(X)
    m = X.shape[0]
    if not 1 <= n <= m:
        raise ValueError(f"sample size must be in 1..{m}, got {n}")
    rows = distinct_draw(np.random.default_rng(seed), m, n)
    return X[rows]


def estimate_next(prev: IterationRecord, last: IterationRecord, m_next: int) -> tuple[float, float]:
    """Linear extrapolation of (k, r) from the last two iterations to sample size ``m_next``."""
    if last.m_i == prev.m_i:
        raise ValueError("progress estimation needs two distinct sample sizes")
    if prev.k_i is None or last.k_i is None:
        raise ValueError("progress estimation needs iterations that found a basis")
    span = (m_next - last.m_i) / (last.m_i - prev.m_i)
    r_hat = last.r_i + (last.r_i - prev.r_i) * span
    k_hat = last.k_i + (last.k_i - prev.k_i) * span
    return max(k_hat, 1.0), max(r_hat, 1e-12)


def should_continue(cost_model: CostFn, k_i: int, k_hat: float, r_hat: float) -> bool:
    """Continue iff the predicted downstream saving covers the next iteration's cost."""
    return cost_model(k_i) - cost_model(k_hat) >= r_hat


def cost_rule_stops(found: Sequence[IterationRecord], cost_model: CostFn, m_next: int) -> bool:
    """Whether the cost rule ends the loop after the last of ``found``.

    ``found`` holds the iterations that produced a basis, oldest first. With
    fewer than two of them there is nothing to extrapolate from and the loop
    goes on.
    """
    if len(found) < 2:
        return False
    k_hat, r_hat = estimate_next(found[-2], found[-1], m_next)
    return not should_continue(cost_model, found[-1].k_i, k_hat, r_hat)


def greedy_stop_index(trace: Sequence[IterationRecord], cost_model: CostFn) -> int:
    """Replay the stopping rule over a scripted trace and return the index it stops at.

    Every record must carry a k. If the rule never fires, the last index is
    returned (the sample is exhausted).
    """
    for t in range(len(trace) - 1):
        if cost_rule_stops(trace[: t + 1], cost_model, trace[t + 1].m_i):
            return t
    return len(trace) - 1


def objective_argmin(trace: Sequence[IterationRecord], cost_model: CostFn) -> int:
    """Index minimizing cumulative iteration cost plus downstream cost (first on ties)."""
    obj = np.cumsum([h.r_i for h in trace]) + np.array([cost_model(h.k_i) for h in trace])
    return int(np.argmin(obj))


def distill(state: WorkReuseState, T_new: Transform, k: int,
            counter: FlopCounter | None = None, weights=None) -> Transform:
    """Append ``T_new``'s columns to the history and return its leading k left singular vectors.

    Args:
        weights: optional per-column scales for the appended columns. Scaling a
            fit's basis by its singular values over sqrt(sample rows) makes
            ``H @ H.T`` the sum of the samples' scatter estimates, so the
            distilled basis is ordered like a PCA of the pooled samples.
    """
    if T_new.k < 1:
        raise ValueError("T_new must have at least one column")
    cols = _weighted(T_new.basis, weights)
    H = cols if state.H is None or state.H.shape[1] == 0 else np.hstack([state.H, cols])
    res = svd(H)
    charge(counter, svd_flops(*H.shape))
    if not 1 <= k <= res.U.shape[1]:
        raise DimensionError(f"k must be in 1..{res.U.shape[1]}, got {k}")
    if H.shape[1] > state.shrink_limit:
        keep = min(state.shrink_limit, res.U.shape[1])
        H = res.U[:, :keep] * res.S[:keep]
    state.H = H
    return Transform(T_new.mean, fix_signs(res.U[:, :k].copy()))


def _weighted(basis: np.ndarray, weights) -> np.ndarray:
    if weights is None:
        return basis
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (basis.shape[1],):
        raise DimensionError(f"need {basis.shape[1]} weights, got shape {weights.shape}")
    return basis * weights


def _iteration_seed(seed: int, i: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, i, stream]).generate_state(1)[0])


def drop(
    X,
    B: float = 0.99,
    cost_model: CostFn | None = None,
    schedule: SampleSchedule | None = None,
    engine: PcaEngine | None = None,
    reuse: bool = True,
    confidence: float = DEFAULT_CONFIDENCE,
    seed: int = 0,
    *,
    pair_cap: int = DEFAULT_PAIR_CAP,
    analytic_time: bool = False,
    flop_seconds: float = DEFAULT_FLOP_SECONDS,
    patience: int = 2,
) -> DropResult:
    """Run DROP on X and return the chosen transform with its iteration history.

    Args:
        X: m x d data matrix.
        B: TLB target in (0, 1].
        cost_model: downstream runtime as a function of dimension. ``None``
            runs until k stops improving for ``patience`` iterations.
        schedule: sampling schedule (default 1% start, 1% steps).
        engine: PCA engine (default randomized SVD).
        reuse: enable concatenate-distill work reuse.
        analytic_time: charge operation counts instead of wall-clock time.
    """
    X = as_data_matrix(X)
    if not 0 < B <= 1:
        raise ValueError(f"B must be in (0, 1], got {B}")
    m, d = X.shape
    if m < 2:
        raise ValueError("DROP needs at least two rows")
    schedule = schedule if schedule is not None else PercentLinear()
    engine = engine if engine is not None else RandomizedSvd()
    counter = FlopCounter(flop_seconds) if analytic_time else None
    state = WorkReuseState(enabled=reuse)

    history: list[IterationRecord] = []
    pairs: PairSample | None = None
    best: Found | None = None
    k_prev: int | None = None
    total = 0.0
    termination: Termination | None = None
    i = 0

    while termination is None:
        i += 1
        t0 = time.perf_counter()
        n = schedule_next(schedule, i, m, history)
        sample = X[distinct_draw(np.random.default_rng(_iteration_seed(seed, i, 0)), m, n)]
        charge(counter, n * d)
        if pairs is None:
            pairs = PairSample(X, _iteration_seed(seed, 0, 1), min(m * (m - 1) // 2, pair_cap), counter,
                               validate=False)
        k_hi = min(k_prev or d, d, n)
        fit = pca_fit(sample, k_hi, engine, _iteration_seed(seed, i, 2), counter)
        outcome: SearchOutcome = search_transform(fit, pairs, B, confidence, pair_cap)
        source = "fresh"
        if reuse:
            outcome, source = _reuse(state, fit, outcome, pairs, B, confidence, pair_cap, k_hi, n,
                                     counter)
        r_i = counter.reset() if counter is not None else time.perf_counter() - t0
        r_i = max(r_i, 1e-12)
        total += r_i

        found = isinstance(outcome, Found)
        if found:
            best = outcome
            k_prev = outcome.k
        obj = None
        if found:
            obj = total + (cost_model(outcome.k) if cost_model is not None else 0.0)
        history.append(IterationRecord(
            i, n, outcome.k if found else None, r_i, obj,
            outcome.tlb if found else outcome.best_estimate, source if found else None,
        ))
        log.debug("iteration %d: m_i=%d k_hi=%d k_i=%s r_i=%.3g", i, n, k_hi,
                  outcome.k if found else None, r_i)

        if cost_model is None and best is not None and _stalls(history)[-1] >= patience:
            termination = Termination.CONVERGED
        elif n >= m:
            termination = Termination.SAMPLE_EXHAUSTED if best is not None else Termination.NEVER_ACHIEVED
        elif found and cost_model is not None:
            done = [h for h in history if h.k_i is not None]
            if cost_rule_stops(done, cost_model, schedule_next(schedule, i + 1, m, history)):
                termination = Termination.COST_OPTIMAL

    return DropResult(
        transform=best.transform if best else None,
        k=best.k if best else None,
        history=history,
        total_dr_seconds=total,
        termination=termination,
        tlb=best.tlb if best else None,
    )


def _reuse(state: WorkReuseState, fit: Transform, outcome: SearchOutcome, pairs: PairSample,
           B: float, confidence: float, pair_cap: int, k_hi: int, n: int,
           counter: FlopCounter | None) -> tuple[SearchOutcome, str]:
    """Fold the fit into the history and offer a distilled candidate when the fit failed.

    A distilled basis only replaces a fresh one when it passes at a smaller k
    (ties go to the fresh fit), and a Found fit already sits at the smallest
    passing k of its own truncations, so the SVD of the history is paid only
    when the fresh fit found nothing. Otherwise the columns are appended and
    the history is compacted once it outgrows its limit.
    """
    contribution = fit.truncate(outcome.k) if isinstance(outcome, Found) else fit
    live = contribution.k - contribution.padded
    if live < 1:
        return outcome, "fresh"
    contribution = contribution.truncate(live)
    sv = contribution.singular_values
    weights = None if sv is None else sv / math.sqrt(n)
    state.shrink_limit = max(4 * k_hi, fit.d)
    had_history = state.H is not None and state.H.shape[1] > 0
    if isinstance(outcome, Found) or not had_history:
        cols = _weighted(contribution.basis, weights)
        H = cols if not had_history else np.hstack([state.H, cols])
        if H.shape[1] > state.shrink_limit:
            res = svd(H)
            charge(counter, svd_flops(*H.shape))
            keep = min(state.shrink_limit, res.U.shape[1])
            H = res.U[:, :keep] * res.S[:keep]
        state.H = H
        return outcome, "fresh"
    width = min(k_hi, state.H.shape[1] + live)
    distilled = distill(state, contribution, width, counter, weights)
    candidate = search_transform(distilled, pairs, B, confidence, pair_cap)
    if isinstance(candidate, Found):
        return candidate, "distilled"
    return outcome, "fresh"
