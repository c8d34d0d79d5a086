"""Portable counter-based random numbers for reproducible synthetic data.

numpy's generators are stable within numpy but hard to reproduce from other
languages. Synthetic datasets are instead drawn from SplitMix64 evaluated at
explicit counters, with normals from the basic Box-Muller transform, so the
same seed yields the same bits anywhere with IEEE double arithmetic.

Output ``n`` of stream ``s`` under seed ``seed`` is::

    z = seed + GOLDEN * (s * 2**40 + n + 1)      (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

with ``GOLDEN = 0x9E3779B97F4A7C15``. A uniform double in [0, 1) is
``(z >> 11) * 2**-53``.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
STREAM_STRIDE = 1 << 40


def splitmix64(seed: int, counters: np.ndarray, stream: int = 0) -> np.ndarray:
    """Raw 64-bit outputs at the given counters of one stream."""
    counters = np.asarray(counters, dtype=np.uint64)
    if not 0 <= stream < (1 << 23):
        raise ValueError("stream must be in [0, 2**23)")
    base = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    offset = np.uint64(stream * STREAM_STRIDE + 1)
    with np.errstate(over="ignore"):
        z = base + GOLDEN * (counters + offset)
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def uniforms(seed: int, n: int, stream: int = 0, start: int = 0) -> np.ndarray:
    """``n`` doubles in [0, 1) with 53 random bits each."""
    z = splitmix64(seed, np.arange(start, start + n, dtype=np.uint64), stream)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normals(seed: int, shape, stream: int = 0) -> np.ndarray:
    """Standard normal variates via Box-Muller, two per pair of uniforms.

    ``1 - u`` replaces the first uniform so the logarithm never sees zero.
    """
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    n = int(np.prod(shape, dtype=np.int64))
    pairs = (n + 1) // 2
    u = uniforms(seed, 2 * pairs, stream)
    u1 = 1.0 - u[0::2]
    u2 = u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:n].reshape(shape)
