"""Sample-efficient PCA for time series: pick the smallest basis that preserves pairwise distances."""

from .baselines import ReducerKind, fft_reduce, paa_reduce, smallest_k
from .data_io import SyntheticSpec, generate_synthetic, parse_delimited
from .downstream import CostModel, dbscan, knn_classify
from .driver import Escalating, FixedStep, PercentLinear, Termination, drop
from .linalg import Transform
from .pca import ExactSvd, RandomizedSvd, SimultaneousIteration, pca_fit
from .search import Found, NotAchievable, compute_transform
from .tlb import evaluate_tlb, tlb_exact, tlb_sampled

__all__ = [
    "CostModel", "Escalating", "ExactSvd", "FixedStep", "Found", "NotAchievable",
    "PercentLinear", "RandomizedSvd", "ReducerKind", "SimultaneousIteration",
    "SyntheticSpec", "Termination", "Transform", "compute_transform", "dbscan", "drop",
    "evaluate_tlb", "fft_reduce", "generate_synthetic", "knn_classify", "paa_reduce",
    "parse_delimited", "pca_fit", "smallest_k", "tlb_exact", "tlb_sampled",
]
