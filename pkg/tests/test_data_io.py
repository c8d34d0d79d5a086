import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dropdr import prng
from dropdr.data_io import (
    Custom,
    DataError,
    EmptyFileError,
    FieldParseError,
    Geometric,
    LabeledDataset,
    Linear,
    RaggedRowError,
    Report,
    SyntheticSpec,
    aggregate,
    flat,
    generate_labeled,
    generate_synthetic,
    parse_delimited,
    parse_synthetic,
    random_orthonormal_rows,
    read_report,
    report_from_result,
    write_delimited,
    write_report,
)
from dropdr.driver import FixedStep, drop
from dropdr.search import compute_transform
import oracles


def write(tmp_path, text, name="data.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParse:
    def test_comma(self, tmp_path):
        ds = parse_delimited(write(tmp_path, "2,0.1,0.2\n1,0.3,0.4\n"))
        np.testing.assert_array_equal(ds.labels, [2, 1])
        np.testing.assert_array_equal(ds.X, [[0.1, 0.2], [0.3, 0.4]])

    def test_tab(self, tmp_path):
        ds = parse_delimited(write(tmp_path, "2\t0.1\t0.2\n1\t0.3\t0.4\n"))
        np.testing.assert_array_equal(ds.labels, [2, 1])
        np.testing.assert_array_equal(ds.X, [[0.1, 0.2], [0.3, 0.4]])

    def test_ucr_float_labels(self, tmp_path):
        ds = parse_delimited(write(tmp_path, "1.0000000e+00,1,2\n2.0000000e+00,3,4\n"))
        assert ds.labels.dtype == np.int64

    def test_string_labels(self, tmp_path):
        ds = parse_delimited(write(tmp_path, "cat,1,2\ndog,3,4\n"))
        assert ds.labels.tolist() == ["cat", "dog"]

    def test_ragged_row_named(self, tmp_path):
        with pytest.raises(RaggedRowError) as info:
            parse_delimited(write(tmp_path, "1,2,3,4\n1,2,3,4\n1,2,3\n1,2,3,4\n"))
        assert info.value.row == 3
        assert "row 3" in str(info.value)

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyFileError):
            parse_delimited(write(tmp_path, "\n\n"))

    @pytest.mark.parametrize("bad", ["nan", "inf", "-Infinity"])
    def test_rejects_non_finite(self, bad, tmp_path):
        with pytest.raises(FieldParseError) as info:
            parse_delimited(write(tmp_path, f"1,2,3\n1,{bad},3\n"))
        assert info.value.row == 2 and info.value.column == 2

    def test_unparseable(self, tmp_path):
        with pytest.raises(FieldParseError) as info:
            parse_delimited(write(tmp_path, "1,2,x\n"))
        assert info.value.column == 3

    def test_single_field(self, tmp_path):
        with pytest.raises(DataError):
            parse_delimited(write(tmp_path, "1\n2\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            parse_delimited(tmp_path / "nope.txt")

    @settings(max_examples=30, deadline=None)
    @given(m=st.integers(1, 6), d=st.integers(1, 5), seed=st.integers(0, 2**31 - 1),
           delim=st.sampled_from([",", "\t"]))
    def test_round_trip(self, m, d, seed, delim, tmp_path_factory):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((m, d)) * 10.0 ** rng.uniform(-8, 8, (m, d))
        ds = LabeledDataset(rng.integers(0, 9, m), X)
        path = tmp_path_factory.mktemp("rt") / "x.txt"
        write_delimited(path, ds, delim)
        back = parse_delimited(path)
        np.testing.assert_array_equal(back.X, X)
        np.testing.assert_array_equal(back.labels, ds.labels)


class TestPrng:
    def test_published_vectors(self):
        got = prng.splitmix64(0, np.arange(3))
        assert [int(v) for v in got] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_stream_vectors(self):
        got = prng.splitmix64(42, np.arange(2), stream=1)
        assert [int(v) for v in got] == [0x83D38E0EDBD43334, 0x7A4E3171F91BEAF9]

    def test_matches_reference(self):
        for seed, stream in [(0, 0), (7, 3), (2**63 + 5, 2)]:
            got = prng.splitmix64(seed, np.arange(5), stream)
            assert [int(v) for v in got] == [oracles.splitmix64(seed, n, stream) for n in range(5)]

    def test_normals_box_muller(self):
        u = [(oracles.splitmix64(7, n) >> 11) * 2.0**-53 for n in range(4)]
        r = math.sqrt(-2.0 * math.log(1.0 - u[0]))
        want = [r * math.cos(2 * math.pi * u[1]), r * math.sin(2 * math.pi * u[1])]
        got = prng.normals(7, 3)
        np.testing.assert_allclose(got[:2], want, rtol=0, atol=1e-15)
        np.testing.assert_allclose(got[:2], [0.9884743323187353, 0.10465664748899398], rtol=0, atol=1e-15)

    def test_uniform_range(self):
        u = prng.uniforms(3, 10_000)
        assert u.min() >= 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.02


class TestSynthetic:
    def test_exact_rank(self):
        X = generate_synthetic(SyntheticSpec(500, 40, 8, seed=1))
        s = np.linalg.svd(X, compute_uv=False)
        assert s[8] <= 1e-8 * s[0]
        assert s[7] > 1e-3 * s[0]

    def test_geometric_decay(self):
        X = generate_synthetic(SyntheticSpec(20_000, 10, 10, Geometric(0.5), seed=2))
        s = np.linalg.svd(X, compute_uv=False)
        ratios = s[1:] / s[:-1]
        assert np.all((ratios >= 0.4) & (ratios <= 0.6))

    def test_single_row(self):
        X = generate_synthetic(SyntheticSpec(1, 6, 2, seed=3))
        assert X.shape == (1, 6) and np.all(np.isfinite(X))

    def test_flat_matches_unit_custom(self):
        a = generate_synthetic(SyntheticSpec(30, 8, 3, seed=4))
        b = generate_synthetic(SyntheticSpec(30, 8, 3, flat(3), seed=4))
        np.testing.assert_array_equal(a, b)

    def test_deterministic(self):
        spec = SyntheticSpec(50, 12, 4, noise_sigma=0.1, seed=9)
        np.testing.assert_array_equal(generate_synthetic(spec), generate_synthetic(spec))

    def test_projection_rows_orthonormal(self):
        P = random_orthonormal_rows(5, 20, 4)
        np.testing.assert_allclose(P @ P.T, np.eye(5), atol=1e-12)

    def test_spectra(self):
        np.testing.assert_allclose(Linear().values(4), [1.0, 0.75, 0.5, 0.25])
        np.testing.assert_allclose(Geometric(0.5).values(3), [1.0, 0.5, 0.25])
        np.testing.assert_array_equal(flat(3).values(3), [1.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            Custom((1.0, 2.0)).values(3)
        with pytest.raises(ValueError):
            Geometric(1.0)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SyntheticSpec(10, 4, 5)
        with pytest.raises(ValueError):
            SyntheticSpec(10, 4, 2, noise_sigma=-1)

    def test_parse_spec(self):
        spec = parse_synthetic("m=100,d=20,intrinsic=4,spectrum=geo:0.5,noise=0.01,seed=3")
        assert spec == SyntheticSpec(100, 20, 4, Geometric(0.5), 0.01, 3)
        assert parse_synthetic("m=5,d=3,intrinsic=2").spectrum is None
        assert parse_synthetic("m=5,d=3,intrinsic=2,spectrum=linear").spectrum == Linear()
        for bad in ["m=1,d=2", "m=1,d=2,intrinsic=1,color=red", "m=1,d=2,intrinsic=1,spectrum=cubic"]:
            with pytest.raises(ValueError):
                parse_synthetic(bad)

    def test_labeled(self):
        ds = generate_labeled(SyntheticSpec(300, 16, 4, seed=5), n_classes=3)
        assert ds.X.shape == (300, 16)
        assert set(ds.labels.tolist()) == {0, 1, 2}


def small_drop_report():
    X = generate_synthetic(SyntheticSpec(600, 16, 3, noise_sigma=1e-3, seed=1))
    res = drop(X, 0.95, lambda k: 10.0 * k, FixedStep(60, 60), seed=2, analytic_time=True)
    return report_from_result(res, dataset="syn", method="drop", B=0.95, confidence=0.95, seed=2,
                              downstream_seconds=1.5, ratio="1:1")


class TestReports:
    def test_fields(self, tmp_path):
        rep = small_drop_report()
        path = tmp_path / "r.json"
        write_report(rep, path)
        data = json.loads(path.read_text())
        for key in ("k", "tlb_mean", "tlb_lo", "tlb_hi", "iterations", "termination", "ratio"):
            assert key in data
        assert data["iterations"][0].keys() == {"m_i", "k_i", "r_i"}

    def test_round_trip(self, tmp_path):
        rep = small_drop_report()
        write_report(rep, tmp_path / "r.json")
        assert read_report(tmp_path / "r.json") == rep

    def test_baseline_outcome(self, rng):
        X = rng.standard_normal((40, 5))
        out = compute_transform(X, X, 0.5, 5)
        rep = report_from_result(out, dataset="d", method="pca-exact", B=0.5, confidence=0.95,
                                 seed=0, dr_seconds=0.25)
        assert rep.k == out.k and rep.termination == "found" and rep.iterations == []

    def test_missing_directory(self, tmp_path):
        with pytest.raises(OSError):
            write_report(small_drop_report(), tmp_path / "no" / "such" / "r.json")

    def test_bad_json(self, tmp_path):
        path = write(tmp_path, "{not json", "r.json")
        with pytest.raises(DataError):
            read_report(path)
        write(tmp_path, json.dumps({"dataset": "x"}), "r.json")
        with pytest.raises(DataError):
            read_report(path)

    def test_aggregate_reproduced_from_files(self, tmp_path):
        reps = [small_drop_report()]
        reps.append(Report("syn", "paa", 0.95, 0.95, None, 0.5, 0.4, 0.6, 0.1, None, [],
                           "not-achievable", 0))
        table = aggregate(reps)
        for n, rep in enumerate(reps):
            write_report(rep, tmp_path / f"{n}.json")
        again = aggregate(read_report(tmp_path / f"{n}.json") for n in range(len(reps)))
        assert again == table
        lines = table.splitlines()
        assert lines[0].split() == ["dataset", "method", "ratio", "k", "tlb_lo", "dr_s",
                                    "downstream_s", "total_s"]
        assert lines[2].split()[3] == "-"
