import numpy as np
import pytest
from scipy.stats import linregress

from dropdr.downstream import (
    NOISE,
    CostModel,
    CostModelFormatError,
    KnnIndex,
    analytic_knn_model,
    dbscan,
    evaluate_cost,
    fit_cost_model,
    knn_classify,
)
from dropdr.linalg import DimensionError
import oracles


class TestCostModel:
    def test_interpolation(self):
        model = CostModel.from_knots([(2, 10.0), (4, 20.0)])
        assert evaluate_cost(model, 3) == pytest.approx(15.0)

    def test_below_first_knot(self):
        model = CostModel.from_knots([(2, 10.0), (4, 20.0)])
        assert model(1) == 10.0

    def test_linear_extension(self):
        model = CostModel.from_knots([(2, 10.0), (4, 20.0)])
        assert model(7) == pytest.approx(35.0)

    def test_isotonic_adjustment(self):
        model = CostModel.from_knots([(4, 20.0), (8, 18.0)])
        assert model.seconds[0] <= model.seconds[1]
        assert model(8) >= model(4)

    def test_dense_scan_monotone(self, rng):
        knots = list(zip(range(1, 40, 3), rng.uniform(0.1, 5.0, 13)))
        model = CostModel.from_knots(knots)
        vals = [model(k) for k in np.linspace(0.5, 60, 500)]
        assert np.all(np.diff(vals) >= -1e-12)

    def test_query_multiplier(self):
        model = CostModel.from_knots([(2, 1.0), (4, 2.0)], q=10)
        assert model(3) == pytest.approx(15.0)
        assert model.with_queries(1)(3) == pytest.approx(1.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            CostModel((1.0, 1.0), (1.0, 2.0))
        with pytest.raises(ValueError):
            CostModel((1.0,), (0.0,))
        with pytest.raises(ValueError):
            CostModel((), ())

    def test_save_load_round_trip(self, tmp_path):
        model = CostModel.from_knots([(1, 0.1), (16, 0.30000000000000004), (64, 1.5)], q=7, task="dbscan")
        path = tmp_path / "cost.txt"
        model.save(path)
        assert path.read_text().splitlines()[0] == "costmodel v1 task=dbscan q=7"
        assert CostModel.load(path) == model

    @pytest.mark.parametrize("text", ["", "costmodel v2 task=knn q=1\n", "costmodel v1 task=knn q=1\n1 2 3\n"])
    def test_bad_files(self, text, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text(text)
        with pytest.raises(CostModelFormatError):
            CostModel.load(path)

    def test_analytic_knn_is_linear(self):
        model = analytic_knn_model(1000, [1, 10, 100], q=2, flop_seconds=1e-9)
        assert model(10) == pytest.approx(2 * 3 * 1000 * 10 * 1e-9)


class TestKnn:
    def test_query_on_point(self, rng):
        P = rng.standard_normal((10, 3))
        idx = KnnIndex(P, np.arange(10))
        np.testing.assert_array_equal(knn_classify(idx, P[[3, 7]]), [3, 7])

    def test_one_dimensional(self):
        idx = KnnIndex([[0.0], [10.0]], np.array(["A", "B"]))
        np.testing.assert_array_equal(knn_classify(idx, [[4.0], [6.0]]), ["A", "B"])

    def test_tie_goes_to_lowest_row(self):
        idx = KnnIndex([[0.0], [2.0], [2.0]], np.array([5, 6, 7]))
        np.testing.assert_array_equal(knn_classify(idx, [[1.0], [2.0]]), [5, 6])

    def test_against_oracle(self, rng):
        P = rng.standard_normal((50, 4))
        labels = rng.integers(0, 5, 50)
        Q = rng.standard_normal((30, 4))
        want = [oracles.nearest_label(P.tolist(), labels.tolist(), q) for q in Q.tolist()]
        np.testing.assert_array_equal(knn_classify(KnnIndex(P, labels), Q), want)

    def test_errors(self, rng):
        with pytest.raises(ValueError):
            KnnIndex(rng.standard_normal((3, 2)), [1, 2])
        with pytest.raises(DimensionError):
            knn_classify(KnnIndex(rng.standard_normal((3, 2)), [1, 2, 3]), np.ones((1, 3)))


def blobs(rng, n=30):
    a = rng.normal(0.0, 0.1, (n, 2))
    b = rng.normal(10.0, 0.1, (n, 2))
    return np.vstack([a, b])


class TestDbscan:
    def test_two_blobs(self, rng):
        labels = dbscan(blobs(rng), 1.0, 4)
        assert set(labels.tolist()) == {0, 1}
        assert np.all(labels[:30] == 0) and np.all(labels[30:] == 1)

    def test_min_pts_above_m(self, rng):
        assert np.all(dbscan(blobs(rng, 5), 100.0, 11) == NOISE)

    @pytest.mark.parametrize("seed", range(5))
    def test_against_reference(self, seed):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(c, 0.5, (15, 2)) for c in (0.0, 3.0, 8.0)] + [rng.uniform(-3, 12, (10, 2))])
        eps, min_pts = 0.7, 4
        want = oracles.dbscan_reference(X.tolist(), eps, min_pts)
        assert oracles.same_partition(dbscan(X, eps, min_pts).tolist(), want)

    def test_core_structure_permutation_invariant(self, rng):
        X = np.vstack([rng.normal(c, 0.6, (25, 2)) for c in (0.0, 4.0)] + [rng.uniform(-3, 7, (15, 2))])
        eps, min_pts = 0.6, 5
        core = np.array([(np.linalg.norm(X - x, axis=1) <= eps).sum() >= min_pts for x in X])
        base = dbscan(X, eps, min_pts)
        perm = rng.permutation(len(X))
        permuted = np.empty_like(base)
        permuted[perm] = dbscan(X[perm], eps, min_pts)
        assert oracles.same_partition(base[core].tolist(), permuted[core].tolist())

    def test_parameter_validation(self, rng):
        with pytest.raises(ValueError):
            dbscan(rng.standard_normal((4, 2)), 0.0, 2)
        with pytest.raises(ValueError):
            dbscan(rng.standard_normal((4, 2)), 1.0, 0)


class TestProfiling:
    def test_knn_cost_grows_linearly(self, rng):
        R = rng.standard_normal((2000, 512))
        dims = [32, 96, 160, 224, 288, 352, 416, 480]
        model = fit_cost_model("knn", R, dims, q=200, repetitions=9)
        fit = linregress(model.ks, model.seconds)
        assert fit.slope > 0
        assert fit.rvalue**2 >= 0.9

    def test_dbscan_profile(self, rng):
        model = fit_cost_model("dbscan", rng.standard_normal((300, 8)), [2, 4, 8], q=1, repetitions=1)
        assert model.task == "dbscan" and len(model.ks) == 3

    def test_bad_inputs(self, rng):
        R = rng.standard_normal((20, 4))
        with pytest.raises(DimensionError):
            fit_cost_model("knn", R, [5])
        with pytest.raises(ValueError):
            fit_cost_model("kmeans", R, [2])
        with pytest.raises(ValueError):
            fit_cost_model("knn", R, [])
