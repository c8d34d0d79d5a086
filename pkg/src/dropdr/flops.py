"""Floating-point operation accounting for the analytic-time mode.

Wall-clock timings make iteration costs machine dependent. When a
:class:`FlopCounter` is threaded through the numerical routines, each routine
charges a textbook operation count for the work it performed, and the
counter converts the total to seconds with a single calibration constant.
The counts follow the usual dense linear algebra conventions (Golub and
Van Loan): one multiply-add is two flops.
"""

from __future__ import annotations

import math

from .config import DEFAULT_FLOP_SECONDS


class FlopCounter:
    """Accumulates operation counts and converts them to seconds."""

    def __init__(self, flop_seconds: float = DEFAULT_FLOP_SECONDS):
        if flop_seconds <= 0:
            raise ValueError("flop_seconds must be positive")
        self.flop_seconds = flop_seconds
        self.flops = 0.0

    def add(self, flops: float) -> None:
        self.flops += float(flops)

    @property
    def seconds(self) -> float:
        return self.flops * self.flop_seconds

    def reset(self) -> float:
        """Zero the counter and return the seconds it held."""
        held = self.seconds
        self.flops = 0.0
        return held


def charge(counter: FlopCounter | None, flops: float) -> None:
    if counter is not None:
        counter.add(flops)


def svd_flops(rows: int, cols: int, left_vectors: bool = True) -> float:
    """Thin SVD cost, cheapest of Golub-Reinsch and R-SVD."""
    big, small = max(rows, cols), min(rows, cols)
    if left_vectors:
        gr = 14.0 * big * small**2 + 8.0 * small**3
        r_svd = 6.0 * big * small**2 + 20.0 * small**3
    else:
        gr = 4.0 * big * small**2 + 8.0 * small**3
        r_svd = 2.0 * big * small**2 + 11.0 * small**3
    return min(gr, r_svd)


def qr_flops(rows: int, cols: int) -> float:
    """Householder QR with explicit thin Q."""
    return 4.0 * rows * cols**2 - (4.0 / 3.0) * cols**3 if rows >= cols else 4.0 * rows**2 * cols


def matmul_flops(rows: int, inner: int, cols: int) -> float:
    return 2.0 * rows * inner * cols


def fft_flops(n_rows: int, length: int) -> float:
    return 5.0 * n_rows * length * math.log2(max(length, 2))


def knn_query_flops(n_index: int, k: int) -> float:
    """Brute-force 1-NN: one squared distance in k dims per index point."""
    return 3.0 * n_index * k
