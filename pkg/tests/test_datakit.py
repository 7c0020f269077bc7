import numpy as np
import pytest

from jamguard.datakit import (
    CSV_HEADER, Dataset, FoldPlan, Scaler,
    csv_read, csv_write, kfold_split, scaler_apply, scaler_fit, shuffle,
)
from jamguard.errors import DataError


def make_dataset(n, seed=0, pos_fraction=0.5):
    rng = np.random.default_rng(seed)
    feats = np.column_stack([
        rng.random(n),
        rng.random(n),
        rng.uniform(-90, -30, n),
        rng.random(n),
    ])
    labels = (rng.random(n) < pos_fraction).astype(np.uint8)
    return Dataset(feats, labels)


class TestDataset:
    def test_rejects_empty(self):
        with pytest.raises(DataError):
            Dataset(np.empty((0, 4)), np.empty(0, dtype=np.uint8))

    def test_rejects_bad_arity(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 5)), np.zeros(3, dtype=np.uint8))

    def test_rejects_bad_labels(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 4)), np.array([0, 1, 2]))

    def test_samples_round_trip(self):
        d = make_dataset(5)
        again = Dataset.from_samples(d.samples)
        assert np.array_equal(again.features, d.features)
        assert np.array_equal(again.labels, d.labels)


class TestShuffle:
    def test_single_sample_unchanged(self):
        d = make_dataset(1)
        assert shuffle(d, 3) == d

    def test_same_seed_same_order(self):
        d = make_dataset(50)
        assert shuffle(d, 9) == shuffle(d, 9)

    def test_multiset_preserved_and_order_changed(self):
        n = 1000
        feats = np.tile(np.arange(n, dtype=float)[:, None], (1, 4))
        labels = np.concatenate([np.zeros(n // 2), np.ones(n // 2)]).astype(np.uint8)
        d = Dataset(feats, labels)
        s = shuffle(d, 4)
        # multiset equality: sorting rows recovers the original exactly
        order = np.argsort(s.features[:, 0])
        assert np.array_equal(s.features[order], feats)
        assert np.array_equal(s.labels[order], labels)
        # sorted label block structure is destroyed
        assert not np.array_equal(s.labels, labels)


class TestScaler:
    def test_constant_column_gets_unit_stddev(self):
        feats = np.ones((10, 4))
        feats[:, 1] = np.arange(10)
        d = Dataset(feats, np.zeros(10, dtype=np.uint8))
        s = scaler_fit(d)
        assert s.stddevs[0] == 1.0
        transformed = scaler_apply(s, d)
        assert np.all(transformed.features[:, 0] == 0.0)

    def test_two_point_zscore(self):
        feats = np.zeros((2, 4))
        feats[:, 2] = [1.0, 3.0]
        d = Dataset(feats, np.zeros(2, dtype=np.uint8))
        out = scaler_apply(scaler_fit(d), d)
        assert np.allclose(out.features[:, 2], [-1.0, 1.0])

    def test_fit_apply_gives_zero_mean_unit_std(self):
        d = make_dataset(500, seed=2)
        out = scaler_apply(scaler_fit(d), d)
        assert np.all(np.abs(out.features.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(out.features.std(axis=0) - 1.0) < 1e-9)

    def test_inverse_recovers_input(self):
        d = make_dataset(100, seed=3)
        s = scaler_fit(d)
        back = s.inverse_transform(s.transform(d.features))
        assert np.all(np.abs(back - d.features) < 1e-12)

    def test_arity_mismatch_rejected(self):
        d = make_dataset(10)
        s = scaler_fit(d)
        with pytest.raises(DataError):
            s.transform(np.zeros((5, 3)))

    def test_order_preserved_per_feature(self):
        d = make_dataset(200, seed=5)
        s = scaler_fit(d)
        out = s.transform(d.features)
        for j in range(4):
            assert np.array_equal(np.argsort(d.features[:, j], kind="stable"),
                                  np.argsort(out[:, j], kind="stable"))


class TestKfold:
    def test_n10_k5_equal_folds(self):
        d = make_dataset(10)
        plan = kfold_split(d, 5, 0, stratified=False)
        sizes = [len(plan.test_indices(f)) for f in range(5)]
        assert sizes == [2, 2, 2, 2, 2]
        all_idx = np.concatenate([plan.test_indices(f) for f in range(5)])
        assert sorted(all_idx.tolist()) == list(range(10))

    def test_n103_k10_sizes(self):
        d = make_dataset(103)
        plan = kfold_split(d, 10, 1, stratified=False)
        sizes = sorted(len(plan.test_indices(f)) for f in range(10))
        assert sizes == [10] * 7 + [11] * 3

    def test_stratified_60_40(self):
        feats = np.random.default_rng(0).random((100, 4))
        labels = np.array([1] * 60 + [0] * 40, dtype=np.uint8)
        d = Dataset(feats, labels)
        plan = kfold_split(d, 5, 7, stratified=True)
        for f in range(5):
            test_labels = d.labels[plan.test_indices(f)]
            assert int(test_labels.sum()) == 12
            assert len(test_labels) - int(test_labels.sum()) == 8

    def test_partition_properties(self):
        d = make_dataset(97, seed=11, pos_fraction=0.3)
        for k in (2, 5, 10, 20):
            plan = kfold_split(d, k, 3)
            covered = np.zeros(97, dtype=int)
            for f in range(k):
                covered[plan.test_indices(f)] += 1
            assert np.all(covered == 1)
            for c in (0, 1):
                sizes = [int(np.sum(d.labels[plan.test_indices(f)] == c))
                         for f in range(k)]
                assert max(sizes) - min(sizes) <= 1

    def test_k_out_of_range(self):
        d = make_dataset(10)
        with pytest.raises(DataError):
            kfold_split(d, 1, 0)
        with pytest.raises(DataError):
            kfold_split(d, 11, 0)

    def test_deterministic(self):
        d = make_dataset(60, seed=8)
        a = kfold_split(d, 5, 123)
        b = kfold_split(d, 5, 123)
        assert np.array_equal(a.assignment, b.assignment)


class TestCsv:
    def test_round_trip(self, tmp_path):
        d = make_dataset(50, seed=4)
        p = tmp_path / "d.csv"
        csv_write(d, p)
        back = csv_read(p)
        assert np.array_equal(back.labels, d.labels)
        assert np.allclose(back.features, d.features, rtol=1e-11, atol=0)

    def test_rerun_is_byte_identical(self, tmp_path):
        d = make_dataset(20, seed=6)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        csv_write(d, p1)
        csv_write(d, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_label_rejected_with_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text(CSV_HEADER + "\n0.5,0.1,-50,0.2,2\n")
        with pytest.raises(DataError, match="line 2"):
            csv_read(p)

    def test_empty_file_distinct_error(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(DataError, match="no data"):
            csv_read(p)

    def test_malformed_header(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("pdr,bpr,rss,cca,label\n0.5,0.1,-50,0.2,1\n")
        with pytest.raises(DataError, match="header"):
            csv_read(p)

    def test_non_numeric_cell_with_row(self, tmp_path):
        p = tmp_path / "nn.csv"
        p.write_text(CSV_HEADER + "\n0.5,0.1,-50,0.2,1\n0.5,oops,-50,0.2,0\n")
        with pytest.raises(DataError, match="line 3"):
            csv_read(p)
