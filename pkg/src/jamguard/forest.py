"""Random forest: bagged CART trees with per-split feature subsampling.

Trees grow greedily on gini or entropy impurity; split thresholds are the
midpoints between consecutive distinct sorted feature values, ties broken by
lowest feature index then smallest threshold. The forest predicts 1 when the
fraction of trees voting 1 strictly exceeds one half.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .datakit import Dataset, Scaler, feature_vector, scaler_fit, FEATURE_ARITY
from .errors import DataError


@dataclass(frozen=True)
class TreeParams:
    """Growth controls shared by every tree in a forest.

    max_depth None means grow until purity or min_samples_split stops a node.
    seed is the base per-tree randomness; the forest trainer overrides it
    with a seed derived per tree index.
    """

    max_depth: int | None = None
    min_samples_split: int = 8
    split_criterion: str = "gini"
    features_per_split: int = 2
    seed: int | None = None

    def __post_init__(self):
        if self.split_criterion not in ("gini", "entropy"):
            raise DataError(f"unknown split criterion {self.split_criterion!r}")
        if self.min_samples_split < 2:
            raise DataError("min_samples_split must be >= 2")
        if not 1 <= self.features_per_split <= FEATURE_ARITY:
            raise DataError(f"features_per_split must be in [1, {FEATURE_ARITY}]")
        if self.max_depth is not None and self.max_depth < 0:
            raise DataError("max_depth must be >= 0 or None")


@njit(cache=True)
def _grow(X, y, max_depth, min_split, mtry, use_entropy, feat_u):
    n = X.shape[0]
    n_feat = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int8)
    threshold = np.full(cap, np.nan, np.float64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    leaf_class = np.full(cap, -1, np.int8)
    leaf_frac = np.full(cap, np.nan, np.float64)

    idx = np.arange(n)
    buf = np.empty(n, np.int64)
    chosen = np.empty(n_feat, np.int64)

    stack_node = np.empty(cap, np.int32)
    stack_lo = np.empty(cap, np.int64)
    stack_hi = np.empty(cap, np.int64)
    stack_depth = np.empty(cap, np.int32)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        m = hi - lo
        ones = 0
        for i in range(lo, hi):
            ones += y[idx[i]]

        stop = ones == 0 or ones == m or m < min_split
        if max_depth >= 0 and depth >= max_depth:
            stop = True
        if not stop:
            # draw mtry distinct features (partial Fisher-Yates on uniforms)
            for f in range(n_feat):
                chosen[f] = f
            for j in range(mtry):
                r = j + int(feat_u[node, j] * (n_feat - j))
                if r >= n_feat:
                    r = n_feat - 1
                tmp = chosen[j]
                chosen[j] = chosen[r]
                chosen[r] = tmp
            # ascending feature order makes the tie-break deterministic
            for a in range(1, mtry):
                key = chosen[a]
                b = a - 1
                while b >= 0 and chosen[b] > key:
                    chosen[b + 1] = chosen[b]
                    b -= 1
                chosen[b + 1] = key

            best_score = np.inf
            best_feat = -1
            best_thr = 0.0
            xs = np.empty(m, np.float64)
            for fj in range(mtry):
                f = chosen[fj]
                for i in range(m):
                    xs[i] = X[idx[lo + i], f]
                order = np.argsort(xs, kind="mergesort")
                c1 = 0
                for i2 in range(1, m):
                    prev = order[i2 - 1]
                    c1 += y[idx[lo + prev]]
                    a_val = xs[prev]
                    b_val = xs[order[i2]]
                    if a_val == b_val:
                        continue
                    nl = i2
                    nr = m - i2
                    l1 = c1
                    r1 = ones - c1
                    pl = l1 / nl
                    pr = r1 / nr
                    if use_entropy:
                        sl = 0.0
                        if 0.0 < pl < 1.0:
                            sl = -(pl * np.log2(pl) + (1 - pl) * np.log2(1 - pl))
                        sr = 0.0
                        if 0.0 < pr < 1.0:
                            sr = -(pr * np.log2(pr) + (1 - pr) * np.log2(1 - pr))
                        score = (nl * sl + nr * sr) / m
                    else:
                        score = (nl * 2.0 * pl * (1.0 - pl)
                                 + nr * 2.0 * pr * (1.0 - pr)) / m
                    if score < best_score:
                        best_score = score
                        best_feat = f
                        thr = 0.5 * (a_val + b_val)
                        if thr >= b_val:  # midpoint rounded up to b: fall back
                            thr = a_val
                        best_thr = thr
            if best_feat < 0:
                stop = True  # all candidate features constant on this node
        if stop:
            leaf_class[node] = 1 if 2 * ones > m else 0
            leaf_frac[node] = ones / m
            continue

        # stable partition: left block (x <= thr) then right block
        p = 0
        for i in range(lo, hi):
            if X[idx[i], best_feat] <= best_thr:
                buf[p] = idx[i]
                p += 1
        nl = p
        for i in range(lo, hi):
            if X[idx[i], best_feat] > best_thr:
                buf[p] = idx[i]
                p += 1
        for i in range(m):
            idx[lo + i] = buf[i]

        feature[node] = best_feat
        threshold[node] = best_thr
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id
        stack_node[top] = left_id
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = right_id
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], leaf_class[:n_nodes], leaf_frac[:n_nodes])


@njit(cache=True)
def _predict_classes(feature, threshold, left, right, leaf_class, X):
    m = X.shape[0]
    out = np.empty(m, np.uint8)
    for i in range(m):
        node = 0
        while leaf_class[node] < 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf_class[node]
    return out


@dataclass
class DecisionTree:
    """Flat-array CART tree. leaf_class < 0 marks internal nodes."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray
    leaf_frac: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_classes(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict_classes(self.feature, self.threshold, self.left,
                                self.right, self.leaf_class, X)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [None if np.isnan(t) else float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf_class": self.leaf_class.tolist(),
            "leaf_frac": [None if np.isnan(v) else float(v) for v in self.leaf_frac],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            feature=np.asarray(d["feature"], np.int8),
            threshold=np.array([np.nan if t is None else t for t in d["threshold"]]),
            left=np.asarray(d["left"], np.int32),
            right=np.asarray(d["right"], np.int32),
            leaf_class=np.asarray(d["leaf_class"], np.int8),
            leaf_frac=np.array([np.nan if v is None else v for v in d["leaf_frac"]]),
        )


def _grow_from(X: np.ndarray, y: np.ndarray, params: TreeParams,
               rng: np.random.Generator) -> DecisionTree:
    n = X.shape[0]
    feat_u = rng.random((2 * n + 1, params.features_per_split))
    depth = -1 if params.max_depth is None else params.max_depth
    arrays = _grow(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.uint8),
        depth, params.min_samples_split, params.features_per_split,
        params.split_criterion == "entropy", feat_u,
    )
    return DecisionTree(*arrays)


def build_tree(train: Dataset, params: TreeParams, seed: int | None = None) -> DecisionTree:
    """Grow one CART tree directly on the dataset's feature values."""
    if len(train) == 0:
        raise DataError("empty training set")
    effective = seed if seed is not None else (params.seed or 0)
    rng = np.random.default_rng(np.random.SeedSequence([int(effective)]))
    return _grow_from(train.features, train.labels, params, rng)


@dataclass
class Forest:
    """Bag of trees trained on bootstrap resamples, plus the training scaler."""

    trees: list
    params: TreeParams
    scaler: Scaler

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    threshold = 0.5

    def tree_votes(self, X: np.ndarray) -> np.ndarray:
        """Per-tree 0/1 votes on raw feature rows, shape (n_trees, n)."""
        Xs = self.scaler.transform(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        return np.stack([t.predict_classes(Xs) for t in self.trees])

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting class 1 (the ROC score of a forest)."""
        return self.tree_votes(X).mean(axis=0)

    def predicts(self, X: np.ndarray) -> np.ndarray:
        return (self.scores(X) > 0.5).astype(np.uint8)

    def score(self, sample) -> float:
        return float(self.scores(feature_vector(sample)[None, :])[0])

    def predict(self, sample) -> int:
        return int(self.predicts(feature_vector(sample)[None, :])[0])

    def describe(self) -> str:
        return f"forest(M={self.n_trees})"

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "family": "forest",
            "params": {
                "max_depth": self.params.max_depth,
                "min_samples_split": self.params.min_samples_split,
                "split_criterion": self.params.split_criterion,
                "features_per_split": self.params.features_per_split,
            },
            "scaler": self.scaler.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        return cls(
            trees=[DecisionTree.from_dict(t) for t in d["trees"]],
            params=TreeParams(**d["params"]),
            scaler=Scaler.from_dict(d["scaler"]),
        )


def fit_forest(train: Dataset, m_trees: int, params: TreeParams | None = None,
               seed: int = 0) -> Forest:
    """Train m_trees CART trees, each on its own bootstrap resample.

    Tree j draws everything from a seed derived from (seed, j), so the result
    does not depend on training order.
    """
    if m_trees < 1:
        raise DataError("m_trees must be >= 1")
    params = params or TreeParams()
    scaler = scaler_fit(train)
    Xs = scaler.transform(train.features)
    y = train.labels
    n = len(train)
    trees = []
    for j in range(m_trees):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), j]))
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_from(Xs[boot], y[boot], params, rng))
    return Forest(trees=trees, params=params, scaler=scaler)


def bootstrap_indices(train_size: int, seed: int, tree_index: int) -> np.ndarray:
    """The exact resample tree `tree_index` of fit_forest(seed=seed) trained on."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), tree_index]))
    return rng.integers(0, train_size, size=train_size)


def vote_fraction(f: Forest, x) -> float:
    """Mean of the trees' 0/1 predictions at one point."""
    return f.score(x)


def forest_predict(f: Forest, x) -> int:
    """Majority vote: 1 only when the vote fraction strictly exceeds 1/2."""
    return f.predict(x)
