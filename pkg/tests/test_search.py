import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dropdr.linalg import DimensionError, Transform
from dropdr.pca import ExactSvd, RandomizedSvd, pca_fit
from dropdr.search import (
    Found,
    NotAchievable,
    compute_transform,
    exhaustive_pairs,
    linear_scan,
    search_probe,
    search_transform,
    smallest_passing,
)
from dropdr.tlb import PairSample, TransformProbe, tlb_exact
from conftest import low_rank
import oracles

STEPS = [0.5, 0.7, 0.9, 0.995, 1.0]


def step_fixture():
    """Points on a line whose every pair has TLB(k) = STEPS[k - 1] under the axis basis."""
    squares = np.diff(np.square([0.0] + STEPS))
    v = np.sqrt(squares)
    X = np.outer(np.arange(1.0, 9.0), v)
    return X, Transform(np.zeros(5), np.eye(5))


class TestSmallestPassing:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 200), st.integers(1, 250))
    def test_matches_linear_scan(self, k_hi, threshold):
        calls = []

        def pred(k):
            calls.append(k)
            return k >= threshold

        got = smallest_passing(k_hi, pred)
        assert got == linear_scan(k_hi, lambda k: k >= threshold)
        assert len(calls) <= math.ceil(math.log2(k_hi)) + 1
        assert calls[0] == k_hi

    def test_rejects_empty_range(self):
        with pytest.raises(ValueError):
            smallest_passing(0, lambda k: True)


class TestStepFixture:
    def test_pair_ratios_are_the_steps(self):
        X, T = step_fixture()
        for k, want in enumerate(STEPS, 1):
            assert tlb_exact(X, T, k) == pytest.approx(want, abs=1e-12)

    def test_found_four(self):
        X, T = step_fixture()
        out = search_transform(T, exhaustive_pairs(X), 0.99, exact=True)
        assert isinstance(out, Found) and out.k == 4
        assert out.tlb.mean == pytest.approx(0.995, abs=1e-12)

    def test_not_achievable_above_top(self):
        X, T = step_fixture()
        out = search_transform(T.truncate(3), exhaustive_pairs(X), 0.95, exact=True)
        assert isinstance(out, NotAchievable)
        assert out.best_estimate.mean == pytest.approx(0.9, abs=1e-12)

    def test_zero_target_gives_one(self):
        X, T = step_fixture()
        out = search_transform(T, exhaustive_pairs(X), 0.0, exact=True)
        assert out.k == 1


class TestComputeTransform:
    def test_zero_target(self, rng):
        X = low_rank(rng, 80, 10, 5, noise=0.1)
        out = compute_transform(X, X[:40], 0.0, 10, seed=1)
        assert isinstance(out, Found) and out.k == 1

    def test_linear_scan_with_exact_oracle(self, rng):
        X = low_rank(rng, 60, 15, 8, noise=0.05)
        sample = X[rng.choice(60, 30, replace=False)]
        out = compute_transform(X, sample, 0.9, 15, ExactSvd(), exact=True)
        fit = pca_fit(sample, 15, ExactSvd())
        want = linear_scan(15, lambda k: oracles.tlb_double_loop(X, fit.mean, fit.basis, k) > 0.9)
        assert out.k == want

    def test_probe_count(self, rng):
        X = low_rank(rng, 300, 40, 12, noise=0.05)
        out = compute_transform(X, X[:150], 0.95, 40, RandomizedSvd(), seed=3)
        assert out.evaluations <= math.ceil(math.log2(40)) + 1

    def test_transform_is_truncated_fit(self, rng):
        X = low_rank(rng, 200, 20, 6, noise=0.1)
        sample = X[:100]
        out = compute_transform(X, sample, 0.9, 20, ExactSvd(), seed=5)
        fit = pca_fit(sample, 20, ExactSvd(), seed=5)
        assert oracles.projector_gap(out.transform.basis, fit.basis[:, : out.k]) <= 1e-8
        assert out.tlb.lo > 0.9 or out.tlb.degenerate

    def test_shared_pairs_make_sampled_predicate_monotone(self, rng):
        X = low_rank(rng, 400, 30, 30, decay=0.85)
        fit = pca_fit(X, 30, ExactSvd())
        probe = TransformProbe(PairSample(X, 8, 20000), fit)
        passes = [search_probe(probe, 0.93, k)[0] is not None for k in range(1, 31)]
        assert passes == sorted(passes)

    def test_bounds(self, rng):
        X = rng.standard_normal((20, 5))
        with pytest.raises(DimensionError):
            compute_transform(X, X[:3], 0.9, 4)
        with pytest.raises(DimensionError):
            compute_transform(X, X[:, :4], 0.9, 2)
