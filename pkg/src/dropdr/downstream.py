"""Downstream operators (1-NN classification, DBSCAN) and the dimension-to-runtime cost model."""

from __future__ import annotations

import statistics
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .config import DEFAULT_FLOP_SECONDS
from .flops import knn_query_flops
from .linalg import DimensionError, as_data_matrix

NOISE = -1


class CostModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CostModel:
    """Piecewise-linear per-query runtime ``C(k)``, scaled by a query count.

    Knot timings are made non-decreasing at construction by isotonic
    regression. Below the first knot the model is constant; above the last
    it continues along the last segment's slope.
    """

    ks: tuple[float, ...]
    seconds: tuple[float, ...]
    query_multiplier: int = 1
    task: str = "knn"

    def __post_init__(self):
        if len(self.ks) == 0 or len(self.ks) != len(self.seconds):
            raise ValueError("cost model needs matching, non-empty knot lists")
        if any(b <= a for a, b in zip(self.ks, self.ks[1:])):
            raise ValueError("knot dimensions must be strictly increasing")
        if any(s <= 0 for s in self.seconds):
            raise ValueError("knot timings must be strictly positive")
        if self.query_multiplier < 0:
            raise ValueError("query_multiplier must be >= 0")

    @classmethod
    def from_knots(cls, knots: Iterable[tuple[float, float]], q: int = 1, task: str = "knn") -> "CostModel":
        pairs = sorted((float(k), float(s)) for k, s in knots)
        ks = [k for k, _ in pairs]
        secs = np.asarray([s for _, s in pairs])
        if len(secs) > 1:
            secs = isotonic_regression(secs, increasing=True).x
        return cls(tuple(ks), tuple(float(s) for s in secs), int(q), task)

    @classmethod
    def from_function(cls, f: Callable[[int], float], dims: Sequence[int], q: int = 1,
                      task: str = "knn") -> "CostModel":
        return cls.from_knots([(k, f(k)) for k in dims], q, task)

    def per_query(self, k: float) -> float:
        ks, secs = self.ks, self.seconds
        if len(ks) == 1 or k <= ks[0]:
            return secs[0]
        if k >= ks[-1]:
            slope = (secs[-1] - secs[-2]) / (ks[-1] - ks[-2])
            return secs[-1] + max(slope, 0.0) * (k - ks[-1])
        return float(np.interp(k, ks, secs))

    def __call__(self, k: float) -> float:
        return evaluate_cost(self, k)

    def with_queries(self, q: int) -> "CostModel":
        return CostModel(self.ks, self.seconds, int(q), self.task)

    def save(self, path) -> None:
        lines = [f"costmodel v1 task={self.task} q={self.query_multiplier}"]
        lines += [f"{_fmt_k(k)}\t{s!r}" for k, s in zip(self.ks, self.seconds)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "CostModel":
        text = Path(path).read_text().splitlines()
        if not text:
            raise CostModelFormatError(f"{path}: empty cost-model file")
        head = text[0].split()
        if len(head) != 4 or head[0] != "costmodel" or head[1] != "v1":
            raise CostModelFormatError(f"{path}: bad header {text[0]!r}")
        fields = dict(h.split("=", 1) for h in head[2:] if "=" in h)
        if set(fields) != {"task", "q"}:
            raise CostModelFormatError(f"{path}: header needs task= and q=")
        knots = []
        for lineno, line in enumerate(text[1:], start=2):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CostModelFormatError(f"{path}:{lineno}: expected 'k<TAB>seconds'")
            knots.append((float(parts[0]), float(parts[1])))
        return cls.from_knots(knots, int(fields["q"]), fields["task"])


def _fmt_k(k: float) -> str:
    return str(int(k)) if float(k).is_integer() else repr(k)


def evaluate_cost(model: CostModel, k: float) -> float:
    """Total downstream seconds at dimension k: ``q * C_per_query(k)``."""
    return model.query_multiplier * model.per_query(k)


def analytic_knn_model(n_index: int, dims: Sequence[int], q: int = 1,
                       flop_seconds: float = DEFAULT_FLOP_SECONDS) -> CostModel:
    """Brute-force 1-NN per-query cost from operation counts instead of timings."""
    return CostModel.from_function(lambda k: knn_query_flops(n_index, k) * flop_seconds, dims, q, "knn")


@dataclass(frozen=True)
class KnnIndex:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = as_data_matrix(self.points, "points")
        labels = np.asarray(self.labels)
        if labels.shape[0] != pts.shape[0]:
            raise ValueError(f"{labels.shape[0]} labels for {pts.shape[0]} points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)


def nearest_rows(points: np.ndarray, queries: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Index of the nearest point for each query; ties go to the lowest row."""
    out = np.empty(queries.shape[0], dtype=np.int64)
    for start in range(0, queries.shape[0], chunk):
        dist = cdist(queries[start:start + chunk], points, "sqeuclidean")
        out[start:start + chunk] = np.argmin(dist, axis=1)
    return out


def knn_classify(index: KnnIndex, queries) -> np.ndarray:
    """Label of the Euclidean-nearest index point for every query row."""
    if index.points.shape[0] == 0:
        raise ValueError("empty index")
    Q = as_data_matrix(queries, "queries")
    if Q.shape[1] != index.points.shape[1]:
        raise DimensionError(f"queries have {Q.shape[1]} columns, index has {index.points.shape[1]}")
    return index.labels[nearest_rows(index.points, Q)]


def dbscan(data, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering; returns a cluster id per row or ``NOISE``.

    A point is core when its closed eps-ball holds at least ``min_pts``
    points (itself included). Seeds are taken in row order and clusters are
    numbered from 0 in order of discovery; a border point joins the first
    cluster that reaches it.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    X = as_data_matrix(data, "data")
    m = X.shape[0]
    neighbors = cKDTree(X).query_ball_point(X, r=eps, return_sorted=True)
    core = np.fromiter((len(nb) >= min_pts for nb in neighbors), dtype=bool, count=m)
    labels = np.full(m, NOISE, dtype=np.int64)
    visited = np.zeros(m, dtype=bool)
    cluster = 0
    for seed in range(m):
        if visited[seed] or not core[seed]:
            continue
        queue = deque([seed])
        visited[seed] = True
        labels[seed] = cluster
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in neighbors[p]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                if not visited[q]:
                    visited[q] = True
                    if core[q]:
                        queue.append(q)
        cluster += 1
    return labels


def _time_call(fn: Callable[[], object], repetitions: int) -> float:
    samples = []
    for _ in range(max(1, repetitions)):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def fit_cost_model(task: str, representative, dims: Sequence[int], q: int = 100,
                   repetitions: int = 3, seed: int = 0, eps: float | None = None,
                   min_pts: int = 5) -> CostModel:
    """Profile the downstream task at each dimension and build a cost model.

    The representative data is cut to its first k columns (it is expected to
    be expressed in a basis ordered by importance). For ``knn`` the timed
    unit is a batch of ``q`` queries against the whole representative set,
    and the knot stores seconds per query. For ``dbscan`` the timed unit is
    one clustering run.
    """
    R = as_data_matrix(representative, "representative")
    if not dims:
        raise ValueError("dims must be non-empty")
    if any(not 1 <= k <= R.shape[1] for k in dims):
        raise DimensionError(f"every dim must be in 1..{R.shape[1]}")
    rng = np.random.default_rng(seed)
    knots = []
    if task == "knn":
        labels = np.zeros(R.shape[0], dtype=np.int64)
        qrows = rng.choice(R.shape[0], size=min(q, R.shape[0]), replace=q > R.shape[0])
        for k in sorted(set(dims)):
            index = KnnIndex(np.ascontiguousarray(R[:, :k]), labels)
            queries = R[qrows, :k]
            elapsed = _time_call(lambda: knn_classify(index, queries), repetitions)
            knots.append((k, max(elapsed / len(qrows), 1e-12)))
    elif task == "dbscan":
        for k in sorted(set(dims)):
            Z = np.ascontiguousarray(R[:, :k])
            radius = eps if eps is not None else default_eps(Z, rng)
            elapsed = _time_call(lambda: dbscan(Z, radius, min_pts), repetitions)
            knots.append((k, max(elapsed, 1e-12)))
    else:
        raise ValueError(f"unknown task {task!r}; expected 'knn' or 'dbscan'")
    return CostModel.from_knots(knots, q, task)


def default_eps(Z: np.ndarray, rng: np.random.Generator) -> float:
    """Median nearest-neighbor distance on a subsample, a scale-free eps guess."""
    rows = rng.choice(Z.shape[0], size=min(500, Z.shape[0]), replace=False)
    if rows.size < 2:
        return 1.0
    dist, _ = cKDTree(Z[rows]).query(Z[rows], k=2)
    value = float(np.median(dist[:, 1]))
    return value if value > 0 else 1.0
