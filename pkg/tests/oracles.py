"""Independent reference implementations used only by the tests.

Everything here is written from the definitions with plain loops and the
math module, sharing no code with the package under test.
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(seed, n, stream=0):
    z = (seed + 0x9E3779B97F4A7C15 * (stream * (1 << 40) + n + 1)) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def project(row, mean, basis, k):
    return [sum((row[t] - mean[t]) * basis[t][j] for t in range(len(row))) for j in range(k)]


def tlb_double_loop(X, mean, basis, k):
    """Mean over pairs i < j of reduced / original distance; coincident pairs count as 1."""
    X = [list(map(float, r)) for r in X]
    basis = [list(map(float, r)) for r in basis]
    Z = [project(r, mean, basis, k) for r in X]
    total, count = 0.0, 0
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            orig = dist(X[i], X[j])
            ratio = 1.0 if orig == 0.0 else min(dist(Z[i], Z[j]) / orig, 1.0)
            total += ratio
            count += 1
    return total / count


def paa_loops(row, k):
    d = len(row)
    out = []
    for j in range(k):
        lo, hi = (j * d) // k, ((j + 1) * d) // k
        frame = row[lo:hi]
        out.append(math.sqrt(len(frame)) * sum(frame) / len(frame))
    return out


def dft_loops(row, k):
    """Interleaved real coefficients of the orthonormal DFT by direct summation."""
    d = len(row)
    coef = []
    for f in range(d // 2 + 1):
        re = sum(row[t] * math.cos(2 * math.pi * f * t / d) for t in range(d)) / math.sqrt(d)
        im = -sum(row[t] * math.sin(2 * math.pi * f * t / d) for t in range(d)) / math.sqrt(d)
        coef.append((re, im))
    out = [coef[0][0]]
    f = 1
    while len(out) < d:
        if 2 * f == d:
            out.append(coef[f][0])
        else:
            out.append(math.sqrt(2) * coef[f][0])
            if len(out) < d:
                out.append(math.sqrt(2) * coef[f][1])
        f += 1
    return out[:k]


def nearest_label(points, labels, query):
    best, best_d = None, math.inf
    for idx, p in enumerate(points):
        dd = sum((a - b) ** 2 for a, b in zip(p, query))
        if dd < best_d:
            best, best_d = idx, dd
    return labels[best]


def dbscan_reference(X, eps, min_pts):
    """Textbook DBSCAN with O(m^2) neighborhoods; -1 marks noise."""
    m = len(X)
    nbrs = [[j for j in range(m) if dist(X[i], X[j]) <= eps] for i in range(m)]
    labels = [None] * m
    cluster = -1
    for i in range(m):
        if labels[i] is not None:
            continue
        if len(nbrs[i]) < min_pts:
            labels[i] = -1
            continue
        cluster += 1
        labels[i] = cluster
        seeds = list(nbrs[i])
        while seeds:
            q = seeds.pop(0)
            if labels[q] == -1:
                labels[q] = cluster
            if labels[q] is not None:
                continue
            labels[q] = cluster
            if len(nbrs[q]) >= min_pts:
                seeds.extend(nbrs[q])
    return labels


def same_partition(a, b):
    """Equal up to relabeling of clusters (noise must match exactly)."""
    mapping = {}
    for x, y in zip(a, b):
        if (x == -1) != (y == -1):
            return False
        if x == -1:
            continue
        if mapping.setdefault(x, y) != y:
            return False
    return len(set(mapping.values())) == len(mapping)


def projector_gap(A, B):
    return float(np.linalg.norm(A @ A.T - B @ B.T))
