import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from fedcba._special import chi2_sf, gammaincc
from fedcba.dataset import (
    AttributeSchema, CATEGORICAL, CategoricalDataset, ChiSquareSelector, DataError, NUMERIC,
    QuantileDiscretizer, SplitSpec, chi_square_statistic, dataset_stats, derive_thalach_ratio,
    discretize, hypertension_schema, load_csv, quantile_edges, select_features, split_and_partition,
)

from oracles import sort_and_slice_bins

HEADER = "age,sex,cp,trestbps,chol,fbs,restecg,thalach,exang,oldpeak,slope,ca,thal,target\n"


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_drops_row_with_empty_cell(self, tmp_path):
        path = write(tmp_path, HEADER
                     + "63,1,3,145,233,1,0,150,0,2.3,0,0,1,1\n"
                     + "37,1,2,130,,0,1,187,0,3.5,0,0,2,1\n"
                     + "41,0,1,130,204,0,0,172,0,1.4,2,0,2,0\n")
        ds = load_csv(path, hypertension_schema())
        assert len(ds) == 2
        assert ds.dropped_rows == 1
        assert ds.class_domain == ("0", "1")
        np.testing.assert_array_equal(ds.column("chol"), [233.0, 204.0])

    def test_header_order_is_irrelevant(self, tmp_path):
        cols = HEADER.strip().split(",")[::-1]
        row = "63,1,3,145,233,1,0,150,0,2.3,0,0,1,1".split(",")[::-1]
        path = write(tmp_path, ",".join(cols) + "\n" + ",".join(row) + "\n")
        ds = load_csv(path, hypertension_schema())
        assert ds.column("age")[0] == 63.0
        assert ds.label_values() == ["1"]

    def test_missing_target_column(self, tmp_path):
        path = write(tmp_path, HEADER.replace(",target", "") + "63,1,3,145,233,1,0,150,0,2.3,0,0,1\n")
        with pytest.raises(DataError, match="target"):
            load_csv(path, hypertension_schema())

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_csv(tmp_path / "nope.csv", hypertension_schema())

    def test_no_usable_rows(self, tmp_path):
        path = write(tmp_path, HEADER + "63,1,3,abc,233,1,0,150,0,2.3,0,0,1,1\n")
        with pytest.raises(DataError, match="no usable rows"):
            load_csv(path, hypertension_schema())

    def test_float_category_codes_are_canonical(self, tmp_path):
        path = write(tmp_path, HEADER + "63,1.0,3,145,233,1,0,150,0,2.3,0,0,1,1.0\n"
                     + "50,0,3,145,233,1,0,150,0,2.3,0,0,1,0\n")
        ds = load_csv(path, hypertension_schema())
        assert ds.attribute("sex").domain == ("0", "1")
        assert ds.class_domain == ("0", "1")


def test_dataset_rejects_out_of_domain_codes():
    with pytest.raises(DataError):
        CategoricalDataset([AttributeSchema("a", CATEGORICAL, ("x",))], [np.array([1])], np.array([0]), ("c",))


def test_stats_on_published_class_counts():
    labels = np.r_[np.zeros(14274, dtype=int), np.ones(11809, dtype=int)]
    ds = CategoricalDataset([], [], labels, ("0", "1"))
    stats = dataset_stats(ds)
    assert stats.record_count == 26083
    assert sum(stats.class_counts.values()) == stats.record_count
    assert stats.imbalance_ratio == pytest.approx(14274 / 11809)
    assert round(stats.imbalance_ratio, 2) == 1.21


def numeric_ds(**columns):
    n = len(next(iter(columns.values())))
    schema = [AttributeSchema(name, NUMERIC) for name in columns]
    return CategoricalDataset(schema, list(columns.values()), np.zeros(n, dtype=int), ("0",))


class TestDiscretize:
    def test_median_split(self):
        ds = discretize(numeric_ds(x=[1.0, 2.0, 3.0, 4.0]), {"x": 2})
        attr = ds.attribute("x")
        assert attr.kind == CATEGORICAL
        assert [attr.domain[c] for c in ds.column("x")] == ["b0", "b0", "b1", "b1"]

    def test_explicit_cut_boundary(self):
        ds = discretize(numeric_ds(trestbps=[119.0, 120.0, 121.0]), {"trestbps": (-math.inf, 120.0, math.inf)})
        assert ds.column("trestbps").tolist() == [0, 1, 1]

    def test_value_outside_explicit_bins(self):
        with pytest.raises(DataError, match="row 1"):
            discretize(numeric_ds(x=[100.0, 300.0]), {"x": (90.0, 120.0, 200.0)})

    def test_quantile_count_below_two(self):
        with pytest.raises(DataError):
            discretize(numeric_ds(x=[1.0, 2.0]), {"x": 1})

    def test_missing_plan_entry(self):
        with pytest.raises(DataError, match="plan"):
            discretize(numeric_ds(x=[1.0, 2.0]), {})

    def test_quartiles_match_sort_and_slice(self):
        values = np.random.default_rng(7).normal(240.0, 50.0, 26083)
        ds = discretize(numeric_ds(chol=values), {"chol": 4})
        codes = ds.column("chol")
        np.testing.assert_array_equal(codes, sort_and_slice_bins(values, 4))
        counts = np.bincount(codes, minlength=4)
        assert np.all(np.abs(counts - len(values) / 4) <= 1)

    def test_heavy_ties_collapse_edges(self):
        assert quantile_edges([1.0] * 5 + [2.0] * 6, 4) == (-math.inf, 2.0, math.inf)
        # an edge equal to the minimum would leave an empty first bin
        assert quantile_edges([1.0] * 10 + [2.0], 4) == (-math.inf, math.inf)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=200), st.integers(2, 6))
    def test_preserves_count_and_domain(self, values, n_bins):
        ds = discretize(numeric_ds(x=values), {"x": n_bins})
        assert len(ds) == len(values)
        codes = ds.column("x")
        assert codes.min() >= 0 and codes.max() < len(ds.attribute("x").domain)

    def test_transformer(self):
        X = np.c_[np.arange(8.0), np.arange(8.0)[::-1]]
        out = QuantileDiscretizer(n_bins=2, edges={1: (-math.inf, 6.0, math.inf)}).fit_transform(X)
        assert out[:, 0].tolist() == ["b0"] * 4 + ["b1"] * 4
        assert out[:, 1].tolist() == ["b1", "b1"] + ["b0"] * 6


class TestThalachRatio:
    def test_ratio_and_column_swap(self):
        ds = derive_thalach_ratio(numeric_ds(age=[40.0, 40.0], thalach=[150.0, 180.0]))
        assert "thalach" not in ds.names
        np.testing.assert_allclose(ds.column("thalach_ratio"), [150 / 180, 1.0])
        assert ds.column("thalach_ratio")[0] == pytest.approx(0.8333, abs=1e-4)

    def test_age_220_rejected(self):
        with pytest.raises(DataError, match="220"):
            derive_thalach_ratio(numeric_ds(age=[50.0, 220.0], thalach=[150.0, 150.0]))


class TestChiSquare:
    def test_textbook_table(self):
        # expected counts 12, 18, 28, 42; each cell deviates by 2
        by_hand = 4 / 12 + 4 / 18 + 4 / 28 + 4 / 42
        stat, dof, _ = chi_square_statistic([[10, 20], [30, 40]])
        assert stat == pytest.approx(by_hand, rel=1e-12)
        assert stat == pytest.approx(0.79365, abs=1e-4)
        assert dof == 1

    def test_independent_table(self):
        stat, dof, p = chi_square_statistic([[25, 25], [25, 25]])
        assert stat == 0 and dof == 1 and p == 1.0

    def test_perfect_dependence(self):
        stat, dof, p = chi_square_statistic([[50, 0], [0, 50]])
        assert stat == pytest.approx(100.0)
        assert dof == 1
        assert p < 1e-20

    def test_critical_value(self):
        assert chi2_sf(3.841, 1) == pytest.approx(0.05, abs=5e-4)

    @pytest.mark.parametrize("bad", [[[1, 2]], [[0, 0], [1, 2]], [[1, 0], [2, 0]]])
    def test_degenerate_tables(self, bad):
        with pytest.raises(DataError):
            chi_square_statistic(bad)

    @pytest.mark.parametrize("a", [0.5, 1.0, 1.5, 2.0, 4.5, 10.0, 60.0])
    @pytest.mark.parametrize("x", [1e-8, 0.01, 0.5, 1.0, 3.0, 9.9, 30.0, 120.0])
    def test_incomplete_gamma_against_scipy(self, a, x):
        assert gammaincc(a, x) == pytest.approx(scipy.special.gammaincc(a, x), abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.lists(st.integers(1, 50), min_size=3, max_size=3), min_size=2, max_size=4),
           st.randoms(use_true_random=False))
    def test_permutation_invariance(self, table, rnd):
        table = np.array(table)
        rows, cols = list(range(table.shape[0])), list(range(table.shape[1]))
        rnd.shuffle(rows)
        rnd.shuffle(cols)
        a = chi_square_statistic(table)
        b = chi_square_statistic(table[rows][:, cols])
        assert b[0] == pytest.approx(a[0], rel=1e-9, abs=1e-12)
        assert b[1] == a[1]

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.lists(st.integers(1, 50), min_size=2, max_size=2), min_size=2, max_size=4),
           st.integers(2, 20))
    def test_scales_linearly(self, table, k):
        stat1 = chi_square_statistic(table)[0]
        statk = chi_square_statistic(np.array(table) * k)[0]
        assert statk == pytest.approx(k * stat1, rel=1e-9, abs=1e-9)


def categorical_ds(columns, labels, class_domain=("0", "1")):
    schema = [AttributeSchema(name, CATEGORICAL, tuple(str(v) for v in range(int(np.max(col)) + 1)))
              for name, col in columns.items()]
    return CategoricalDataset(schema, list(columns.values()), labels, class_domain)


class TestSelectFeatures:
    def test_label_copy_is_kept(self):
        labels = np.random.default_rng(0).integers(0, 2, 500)
        ds = categorical_ds({"copy": labels.copy()}, labels)
        reduced, dropped = select_features(ds, 0.05)
        assert dropped == [] and reduced.names == ["copy"]

    def test_independent_noise_is_dropped(self):
        drops = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            labels = rng.integers(0, 2, 26000)
            noise = rng.integers(0, 4, 26000)
            _, dropped = select_features(categorical_ds({"noise": noise}, labels), 0.05)
            drops += dropped == ["noise"]
        assert drops >= 90

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 2, 400)
        ds = categorical_ds({"a": rng.integers(0, 3, 400), "b": (labels + rng.integers(0, 2, 400)) % 2}, labels)
        assert select_features(ds, 0.05)[1] == select_features(ds, 0.05)[1]

    def test_single_class_rejected(self):
        ds = categorical_ds({"a": np.array([0, 1, 0])}, np.zeros(3, dtype=int))
        with pytest.raises(DataError, match="marginal"):
            select_features(ds, 0.05)

    def test_selector_estimator(self):
        rng = np.random.default_rng(1)
        y = rng.integers(0, 2, 1000)
        X = np.c_[y, rng.integers(0, 3, 1000)].astype(str)
        sel = ChiSquareSelector(alpha=0.01).fit(X, y)
        assert sel.get_support().tolist() == [True, False]
        assert sel.transform(X).shape == (1000, 1)


class TestSplit:
    def test_ten_records_two_clients(self):
        ds = categorical_ds({"a": np.arange(10) % 2}, np.zeros(10, dtype=int))
        parts, test = split_and_partition(ds, SplitSpec(0.8, 2, 0))
        assert [len(p) for p in parts] == [4, 4] and len(test) == 2

    def test_published_sizes(self):
        n = 26083
        ds = categorical_ds({"a": np.arange(n) % 3}, np.zeros(n, dtype=int))
        parts, test = split_and_partition(ds, SplitSpec(0.8, 3, 0))
        # floor(0.8 * 26083) = 20866 = 6956 + 6955 + 6955
        assert [len(p) for p in parts] == [6956, 6955, 6955]
        assert len(test) == 5217

    def test_same_seed_same_partition(self):
        ds = categorical_ds({"a": np.arange(100) % 5}, np.arange(100) % 2)
        a = split_and_partition(ds, SplitSpec(0.7, 3, 99))
        b = split_and_partition(ds, SplitSpec(0.7, 3, 99))
        for x, y in zip(a[0] + [a[1]], b[0] + [b[1]]):
            np.testing.assert_array_equal(x.column("a"), y.column("a"))

    def test_empty_client_rejected(self):
        ds = categorical_ds({"a": np.array([0, 1, 0])}, np.zeros(3, dtype=int))
        with pytest.raises(DataError):
            split_and_partition(ds, SplitSpec(0.5, 3, 0))

    @pytest.mark.parametrize("bad", [dict(train_fraction=0.0), dict(train_fraction=1.0), dict(client_count=0),
                                     dict(seed=-1), dict(seed=2**64)])
    def test_invalid_spec(self, bad):
        with pytest.raises(ValueError):
            SplitSpec(**bad)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(5, 300), st.integers(1, 5), st.integers(0, 2**64 - 1),
           st.floats(0.3, 0.95))
    def test_partition_property(self, n, clients, seed, fraction):
        ds = categorical_ds({"id": np.arange(n)}, np.zeros(n, dtype=int))
        if int(fraction * n + 1e-9) < clients:
            return
        parts, test = split_and_partition(ds, SplitSpec(fraction, clients, seed))
        ids = np.concatenate([p.column("id") for p in parts] + [test.column("id")])
        assert sorted(ids.tolist()) == list(range(n))
        sizes = [len(p) for p in parts]
        assert max(sizes) - min(sizes) <= 1
