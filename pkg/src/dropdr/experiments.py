"""End-to-end comparisons: DR methods followed by a downstream task.

The total cost of a method is its DR time (search, fit, and projecting the
index) plus the downstream time. For k-NN the downstream time is
``q * per_query(k)`` where the index holds all m rows and the index:query
ratio N:M sets ``q = m * M / N``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .baselines import ReducerKind, fft_reduce, paa_reduce, smallest_k
from .config import DEFAULT_CONFIDENCE, DEFAULT_FLOP_SECONDS
from .data_io import Report, report_from_result
from .downstream import (
    CostModel,
    KnnIndex,
    analytic_knn_model,
    dbscan,
    default_eps,
    fit_cost_model,
    knn_classify,
)
from .driver import DropResult, SampleSchedule, drop
from .flops import FlopCounter, fft_flops, knn_query_flops, matmul_flops
from .linalg import as_data_matrix
from .pca import PcaEngine, RandomizedSvd, engine_from_name
from .search import SearchOutcome

METHODS = ("drop", "pca-exact", "pca-randomized", "paa", "fft")
TASKS = ("knn", "dbscan")


@dataclass(frozen=True)
class Ratio:
    index: int
    query: int

    def __post_init__(self):
        if self.index < 1 or self.query < 1:
            raise ValueError("ratio parts must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "Ratio":
        parts = text.split(":")
        if len(parts) != 2:
            raise ValueError(f"bad ratio {text!r}; expected N:M")
        try:
            return cls(int(parts[0]), int(parts[1]))
        except ValueError:
            raise ValueError(f"bad ratio {text!r}; expected positive integers N:M") from None

    def queries(self, n_index: int) -> int:
        return math.ceil(n_index * self.query / self.index)

    def __str__(self) -> str:
        return f"{self.index}:{self.query}"


@dataclass
class DrRun:
    method: str
    outcome: DropResult | SearchOutcome
    k: Optional[int]
    dr_seconds: float

    @property
    def found(self) -> bool:
        return self.k is not None


def apply_flops(method: str, m: int, d: int, k: int) -> float:
    """Operations needed to reduce m rows with the chosen method."""
    if method == "paa":
        return float(m * d)
    if method == "fft":
        return fft_flops(m, d)
    return matmul_flops(m, d, k) + m * d


def reduce_rows(method: str, run: DrRun, X: np.ndarray) -> np.ndarray:
    if method == "paa":
        return paa_reduce(X, run.k)
    if method == "fft":
        return fft_reduce(X, run.k)
    transform = run.outcome.transform
    return transform.apply(X)


def downstream_model(task: str, X: np.ndarray, q: int, analytic_time: bool,
                     flop_seconds: float = DEFAULT_FLOP_SECONDS, seed: int = 0) -> CostModel:
    """Cost model DROP optimizes against: profiled, or from operation counts."""
    m, d = X.shape
    dims = sorted({1, 2, 4, 8, 16, 32, 64, 128, 256, d} & set(range(1, d + 1)))
    if task == "knn":
        if analytic_time:
            return analytic_knn_model(m, dims, q, flop_seconds)
        return fit_cost_model("knn", X, dims, q=min(q, 100), repetitions=3, seed=seed).with_queries(q)
    if task == "dbscan":
        if analytic_time:
            return CostModel.from_function(lambda k: 3.0 * m * m * k * flop_seconds, dims, 1, "dbscan")
        return fit_cost_model("dbscan", X, dims, q=1, repetitions=1, seed=seed)
    raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


def run_dr(method: str, X, B: float, *, confidence: float = DEFAULT_CONFIDENCE, seed: int = 0,
           analytic_time: bool = False, flop_seconds: float = DEFAULT_FLOP_SECONDS,
           cost_model: CostModel | None = None, schedule: SampleSchedule | None = None,
           engine: PcaEngine | None = None, reuse: bool = True,
           use_cost_model: bool = True) -> DrRun:
    """Run one DR method and charge it for finding k and reducing all rows."""
    X = as_data_matrix(X)
    m, d = X.shape
    counter = FlopCounter(flop_seconds) if analytic_time else None
    t0 = time.perf_counter()
    if method == "drop":
        outcome = drop(X, B, cost_model if use_cost_model else None, schedule, engine, reuse,
                       confidence, seed, analytic_time=analytic_time, flop_seconds=flop_seconds)
        k = outcome.k
        search_seconds = outcome.total_dr_seconds
    elif method in METHODS:
        outcome = smallest_k(ReducerKind(method), X, B, confidence, seed, counter=counter)
        k = outcome.k if outcome.found else None
        search_seconds = counter.reset() if counter else time.perf_counter() - t0
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    run = DrRun(method, outcome, k, 0.0)
    if k is None:
        run.dr_seconds = search_seconds
        return run
    if analytic_time:
        apply_seconds = apply_flops(method, m, d, k) * flop_seconds
    else:
        t1 = time.perf_counter()
        reduce_rows(method, run, X)
        apply_seconds = time.perf_counter() - t1
    run.dr_seconds = search_seconds + apply_seconds
    return run


def downstream_seconds(task: str, run: DrRun, X: np.ndarray, q: int, analytic_time: bool,
                       flop_seconds: float = DEFAULT_FLOP_SECONDS, seed: int = 0,
                       timed_queries: int = 256) -> float:
    """Downstream cost on the reduced data.

    k-NN: q times the per-query cost, measured on a batch of at most
    ``timed_queries`` queries (or counted analytically). DBSCAN: one run.
    """
    m = X.shape[0]
    if task == "knn":
        if analytic_time:
            return q * knn_query_flops(m, run.k) * flop_seconds
        Z = np.ascontiguousarray(reduce_rows(run.method, run, X))
        rows = np.random.default_rng(seed).choice(m, size=min(q, timed_queries, m), replace=False)
        index = KnnIndex(Z, np.zeros(m, dtype=np.int64))
        t0 = time.perf_counter()
        knn_classify(index, Z[rows])
        return (time.perf_counter() - t0) / rows.size * q
    if task == "dbscan":
        if analytic_time:
            return 3.0 * m * m * run.k * flop_seconds
        Z = np.ascontiguousarray(reduce_rows(run.method, run, X))
        eps = default_eps(Z, np.random.default_rng(seed))
        t0 = time.perf_counter()
        dbscan(Z, eps, 5)
        return time.perf_counter() - t0
    raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


def bench(X, dataset: str, B: float = 0.99, *, methods: Sequence[str] = METHODS,
          ratios: Sequence[Ratio] = (Ratio(1, 1), Ratio(1, 5), Ratio(1, 50)),
          task: str = "knn", confidence: float = DEFAULT_CONFIDENCE, seed: int = 0,
          analytic_time: bool = False, flop_seconds: float = DEFAULT_FLOP_SECONDS,
          schedule: SampleSchedule | None = None, engine: PcaEngine | None = None,
          reuse: bool = True) -> list[Report]:
    """One report per (ratio, method) cell, ratios outermost.

    Baselines do not depend on the query count and run once; DROP optimizes
    for each ratio's q and so runs once per ratio.
    """
    X = as_data_matrix(X)
    m = X.shape[0]
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    fixed = {
        method: run_dr(method, X, B, confidence=confidence, seed=seed,
                       analytic_time=analytic_time, flop_seconds=flop_seconds)
        for method in methods if method != "drop"
    }
    reports = []
    for ratio in ratios:
        q = ratio.queries(m) if task == "knn" else 1
        for method in methods:
            if method == "drop":
                model = downstream_model(task, X, q, analytic_time, flop_seconds, seed)
                run = run_dr("drop", X, B, confidence=confidence, seed=seed,
                             analytic_time=analytic_time, flop_seconds=flop_seconds,
                             cost_model=model, schedule=schedule, engine=engine, reuse=reuse)
            else:
                run = fixed[method]
            down = None
            if run.found:
                down = downstream_seconds(task, run, X, q, analytic_time, flop_seconds, seed)
            reports.append(report_from_result(
                run.outcome, dataset=dataset, method=method, B=B, confidence=confidence,
                seed=seed, downstream_seconds=down, dr_seconds=run.dr_seconds,
                ratio=str(ratio), task=task, queries=q, analytic_time=analytic_time,
            ))
    return reports


LESION_CONFIGS = {
    "drop": {},
    "exact-svd": {"engine": "exact"},
    "no-sampling": {"method": "pca-randomized"},
    "run-to-convergence": {"use_cost_model": False},
    "no-reuse": {"reuse": False},
}


def lesion(X, dataset: str, B: float = 0.99, *, ratio: Ratio = Ratio(1, 1), task: str = "knn",
           confidence: float = DEFAULT_CONFIDENCE, seed: int = 0, analytic_time: bool = False,
           flop_seconds: float = DEFAULT_FLOP_SECONDS,
           schedule: SampleSchedule | None = None) -> list[Report]:
    """Switch off one DROP component at a time and report each configuration."""
    X = as_data_matrix(X)
    q = ratio.queries(X.shape[0]) if task == "knn" else 1
    model = downstream_model(task, X, q, analytic_time, flop_seconds, seed)
    reports = []
    for name, cfg in LESION_CONFIGS.items():
        method = cfg.get("method", "drop")
        engine = engine_from_name(cfg["engine"]) if "engine" in cfg else RandomizedSvd()
        run = run_dr(method, X, B, confidence=confidence, seed=seed, analytic_time=analytic_time,
                     flop_seconds=flop_seconds, cost_model=model, schedule=schedule,
                     engine=engine, reuse=cfg.get("reuse", True),
                     use_cost_model=cfg.get("use_cost_model", True))
        down = downstream_seconds(task, run, X, q, analytic_time, flop_seconds, seed) if run.found else None
        reports.append(report_from_result(
            run.outcome, dataset=dataset, method=name, B=B, confidence=confidence, seed=seed,
            downstream_seconds=down, dr_seconds=run.dr_seconds, ratio=str(ratio), task=task,
            queries=q, analytic_time=analytic_time,
        ))
    return reports
