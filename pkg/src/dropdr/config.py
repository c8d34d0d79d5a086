"""Library-wide numeric tolerances and defaults."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    orthonormality: float = 1e-8
    reconstruction: float = 1e-6
    contraction: float = 1e-9
    # per-pair ratios this close to 1 are snapped to exactly 1
    ratio_snap: float = 1e-12
    # |R_jj| below rank_rtol * max|R_ii| marks a dependent column in QR
    rank_rtol: float = 1e-10


TOL = Tolerances()

DEFAULT_TLB_TARGET = 0.99
DEFAULT_CONFIDENCE = 0.95
DEFAULT_PAIR_CAP = 65_536
INITIAL_PAIRS = 100
DEFAULT_OVERSAMPLE = 10
DEFAULT_POWER_ITERS = 2
# seconds charged per floating-point operation in analytic-time mode
DEFAULT_FLOP_SECONDS = 1e-9
