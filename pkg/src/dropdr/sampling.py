"""Uniform sampling without replacement whose cost does not depend on the population size."""

from __future__ import annotations

import numpy as np


def distinct_draw(rng: np.random.Generator, population: int, n: int) -> np.ndarray:
    """``n`` distinct integers from ``range(population)`` in uniformly random order.

    ``Generator.choice(..., replace=False)`` permutes the whole population,
    which is O(population). For small draws this instead draws with
    replacement and discards repeats, keeping first occurrences, which gives
    the same distribution in O(n) expected time.
    """
    if not 0 <= n <= population:
        raise ValueError(f"cannot draw {n} distinct values from {population}")
    if 4 * n > population:
        return rng.permutation(population)[:n]
    out = np.empty(0, dtype=np.int64)
    while out.shape[0] < n:
        need = n - out.shape[0]
        batch = np.concatenate([out, rng.integers(0, population, size=need + need // 8 + 8)])
        _, first = np.unique(batch, return_index=True)
        out = batch[np.sort(first)]
    return out[:n]
