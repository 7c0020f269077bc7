import numpy as np
import pytest

from jamguard.datakit import Dataset, Scaler
from jamguard.errors import DataError
from jamguard.forest import (
    DecisionTree, Forest, TreeParams,
    bootstrap_indices, build_tree, fit_forest, forest_predict, vote_fraction,
)
from jamguard.modelio import load_model, save_model
from jamguard.simkit import Sample


def dataset_from_1d(x, y):
    feats = np.zeros((len(x), 4))
    feats[:, 0] = x
    return Dataset(feats, np.asarray(y, dtype=np.uint8))


def noisy_dataset(n, seed):
    rng = np.random.default_rng(seed)
    feats = rng.random((n, 4))
    labels = ((feats[:, 0] + 0.3 * rng.standard_normal(n)) > 0.5).astype(np.uint8)
    return Dataset(feats, labels)


def leaf_tree(cls):
    return DecisionTree(
        feature=np.array([-1], np.int8),
        threshold=np.array([np.nan]),
        left=np.array([-1], np.int32),
        right=np.array([-1], np.int32),
        leaf_class=np.array([cls], np.int8),
        leaf_frac=np.array([float(cls)]),
    )


def stub_forest(votes):
    return Forest(trees=[leaf_tree(v) for v in votes], params=TreeParams(),
                  scaler=Scaler.identity())


SAMPLE = Sample(pdr=0.5, bpr=0.1, rss_dbm=-45.0, cca_busy_ratio=0.2, label=0)


class TestBuildTree:
    def test_pure_node_is_leaf(self):
        d = dataset_from_1d([0.0, 1.0, 2.0], [1, 1, 1])
        t = build_tree(d, TreeParams(features_per_split=4), seed=0)
        assert t.n_nodes == 1
        assert t.leaf_class[0] == 1
        assert t.leaf_frac[0] == 1.0

    def test_unsplittable_mixed_node(self):
        # all features constant: leaf keeps the class-1 fraction, majority tie -> 0
        d = Dataset(np.ones((4, 4)), np.array([1, 1, 0, 0], np.uint8))
        t = build_tree(d, TreeParams(features_per_split=4, min_samples_split=2), 0)
        assert t.n_nodes == 1
        assert t.leaf_frac[0] == 0.5
        assert t.leaf_class[0] == 0

    def test_separable_1d_depth_one(self):
        rng = np.random.default_rng(1)
        x = np.concatenate([rng.uniform(-2, -0.1, 40), rng.uniform(0.1, 2, 40)])
        y = (x >= 0).astype(int)
        d = dataset_from_1d(x, y)
        t = build_tree(d, TreeParams(max_depth=1, features_per_split=4,
                                     min_samples_split=2), seed=0)
        pred = t.predict_classes(d.features)
        assert np.array_equal(pred, d.labels)
        # brute-force oracle: the best threshold over feature 0 separates fully
        best_acc = 0.0
        xs = np.sort(x)
        for thr in (xs[:-1] + xs[1:]) / 2:
            acc = max(np.mean((x <= thr) == (y == 0)), np.mean((x <= thr) == (y == 1)))
            best_acc = max(best_acc, acc)
        assert best_acc == 1.0

    def test_tie_break_lowest_feature(self):
        # duplicate the informative column: equal-impurity splits on 0 and 1
        rng = np.random.default_rng(2)
        x = rng.standard_normal(60)
        feats = np.zeros((60, 4))
        feats[:, 0] = x
        feats[:, 1] = x
        d = Dataset(feats, (x > 0).astype(np.uint8))
        t = build_tree(d, TreeParams(features_per_split=4, min_samples_split=2), 7)
        assert t.feature[0] == 0

    def test_monotone_impurity(self):
        d = noisy_dataset(400, 4)
        t = build_tree(d, TreeParams(features_per_split=2, min_samples_split=8), 3)

        def gini(labels):
            if len(labels) == 0:
                return 0.0
            p = labels.mean()
            return 2 * p * (1 - p)

        def walk(node, idx):
            if t.leaf_class[node] >= 0:
                return
            mask = d.features[idx, t.feature[node]] <= t.threshold[node]
            li, ri = idx[mask], idx[~mask]
            assert len(li) > 0 and len(ri) > 0
            parent = gini(d.labels[idx].astype(float))
            child = (len(li) * gini(d.labels[li].astype(float))
                     + len(ri) * gini(d.labels[ri].astype(float))) / len(idx)
            assert child <= parent + 1e-12
            walk(t.left[node], li)
            walk(t.right[node], ri)

        walk(0, np.arange(len(d)))


class TestFitForest:
    def test_single_tree_equals_forest(self):
        d = noisy_dataset(300, 5)
        f = fit_forest(d, 1, TreeParams(), seed=9)
        votes = f.tree_votes(d.features)[0]
        assert np.array_equal(f.predicts(d.features), votes)

    def test_deterministic(self):
        d = noisy_dataset(200, 6)
        a = fit_forest(d, 5, TreeParams(), seed=3)
        b = fit_forest(d, 5, TreeParams(), seed=3)
        assert a.to_dict() == b.to_dict()

    def test_rejects_zero_trees(self):
        d = noisy_dataset(50, 7)
        with pytest.raises(DataError):
            fit_forest(d, 0, TreeParams(), seed=0)

    def test_bootstrap_training_accuracy_beats_majority(self):
        d = noisy_dataset(400, 8)
        f = fit_forest(d, 10, TreeParams(), seed=4)
        Xs = f.scaler.transform(d.features)
        for j, tree in enumerate(f.trees):
            boot = bootstrap_indices(len(d), 4, j)
            yb = d.labels[boot]
            acc = np.mean(tree.predict_classes(Xs[boot]) == yb)
            majority = max(yb.mean(), 1 - yb.mean())
            assert acc >= majority


class TestVoting:
    def test_vote_fraction_two_thirds(self):
        assert vote_fraction(stub_forest([1, 1, 0]), SAMPLE) == pytest.approx(2 / 3)

    def test_unanimous(self):
        assert vote_fraction(stub_forest([1, 1, 1]), SAMPLE) == 1.0

    def test_even_split(self):
        f = stub_forest([1, 1, 0, 0])
        assert vote_fraction(f, SAMPLE) == 0.5
        assert forest_predict(f, SAMPLE) == 0  # exact tie goes to 0

    def test_majority_detects(self):
        assert forest_predict(stub_forest([1, 1, 0]), SAMPLE) == 1

    def test_no_votes(self):
        assert forest_predict(stub_forest([0, 0, 0]), SAMPLE) == 0

    def test_predict_matches_vote_threshold(self):
        d = noisy_dataset(500, 9)
        f = fit_forest(d, 7, TreeParams(), seed=2)
        rng = np.random.default_rng(10)
        X = rng.random((400, 4))
        votes = f.tree_votes(X)
        brute = (votes.sum(axis=0) / votes.shape[0] > 0.5).astype(np.uint8)
        assert np.array_equal(f.predicts(X), brute)

    def test_tree_order_invariant(self):
        d = noisy_dataset(300, 11)
        f = fit_forest(d, 9, TreeParams(), seed=5)
        rng = np.random.default_rng(12)
        X = rng.random((100, 4))
        base = f.scores(X)
        shuffled = Forest(trees=list(reversed(f.trees)), params=f.params,
                          scaler=f.scaler)
        assert np.array_equal(base, shuffled.scores(X))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        d = noisy_dataset(250, 13)
        f = fit_forest(d, 5, TreeParams(max_depth=6), seed=8)
        p = tmp_path / "forest.json"
        save_model(f, p)
        g = load_model(p)
        assert isinstance(g, Forest)
        assert np.array_equal(f.predicts(d.features), g.predicts(d.features))
        assert g.params == f.params
