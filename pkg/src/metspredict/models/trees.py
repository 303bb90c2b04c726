"""Decision tree and random forest with greedy Gini splits.

Trees are stored as flat parallel arrays (feature, threshold, left, right,
value); feature == -1 marks a leaf. Growth and prediction run in compiled
kernels (see _fast_tree): split search scans per-feature sorted orderings
that are partitioned down the tree, so nothing is re-sorted below the root.
Tie-breaking is deterministic: lowest feature index, then lowest threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._util import rng_for
from ._fast_tree import grow_gini_tree_impl, predict_flat_tree

_NO_DEPTH_LIMIT = 2**31


class FitError(ValueError):
    pass


class DataError(ValueError):
    pass


def check_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) == 0:
        raise FitError("training set must be a nonempty 2-d matrix")
    if not np.isfinite(X).all():
        raise DataError("training features contain non-finite values")
    if len(y) != len(X):
        raise FitError("X and y length mismatch")
    if not np.isin(y, (0, 1)).all():
        raise FitError("labels must be 0/1")
    return X, y.astype(np.float64)


def check_predict_input(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != d:
        raise DataError(f"expected a matrix with {d} columns, got shape {X.shape}")
    return X


@dataclass
class FlatTree:
    """Binary tree as parallel arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        predict_flat_tree(
            np.ascontiguousarray(X), self.feature, self.threshold, self.left, self.right, self.value, out
        )
        return out

    def depth(self) -> int:
        depths = np.zeros(len(self.feature), dtype=np.int32)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max(initial=0))

    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())


def grow_gini_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    feature_rng: np.random.Generator | None = None,
    max_features: int | None = None,
) -> FlatTree:
    """Greedy CART growth; splits only while Gini impurity strictly decreases.

    With ``feature_rng`` set, each node considers a random ``max_features``-
    subset of columns (random-forest style); subsets are pre-drawn per node
    id so growth stays reproducible. Otherwise every column is a candidate.
    """
    n, d = X.shape
    Xt = np.ascontiguousarray(X.T)
    order0 = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int32))

    cap = 2 * n + 1
    feat = np.full(cap, -1, dtype=np.int32)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap)

    use_pool = feature_rng is not None and max_features is not None and max_features < d
    if use_pool:
        keys = feature_rng.random((cap, d))
        pool = np.argsort(keys, axis=1)[:, :max_features].astype(np.int32)
        pool.sort(axis=1)
        pool = np.ascontiguousarray(pool)
    else:
        pool = np.zeros((1, 1), dtype=np.int32)

    n_nodes = grow_gini_tree_impl(
        Xt,
        order0,
        y,
        _NO_DEPTH_LIMIT if max_depth is None else int(max_depth),
        int(min_samples_split),
        use_pool,
        pool,
        feat,
        thr,
        left,
        right,
        value,
    )
    return FlatTree(
        feature=feat[:n_nodes].copy(),
        threshold=thr[:n_nodes].copy(),
        left=left[:n_nodes].copy(),
        right=right[:n_nodes].copy(),
        value=value[:n_nodes].copy(),
    )


class DecisionTreeClassifier:
    """CART-style binary classifier; leaf probability = positive fraction."""

    def __init__(self, max_depth: int | None = None, min_samples_split: int = 2, seed: int = 0):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.seed = seed
        self.tree_: FlatTree | None = None
        self.n_features_: int | None = None

    def fit(self, X, y) -> "DecisionTreeClassifier":
        X, y = check_training_data(X, y)
        self.n_features_ = X.shape[1]
        self.tree_ = grow_gini_tree(
            X, y, max_depth=self.max_depth, min_samples_split=self.min_samples_split
        )
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features_)
        return self.tree_.predict_value(X)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)


class RandomForestClassifier:
    """Bagged Gini trees with per-node feature subsampling; majority vote.

    The reported probability is the fraction of trees voting for class 1.
    With ``bootstrap=False`` and ``max_features=None`` a single tree is the
    plain decision tree, which the tests rely on.
    """

    def __init__(
        self,
        n_trees: int = 200,
        max_depth: int | None = None,
        min_samples_split: int = 2,
        max_features: int | str | None = "sqrt",
        bootstrap: bool = True,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed
        self.trees_: list[FlatTree] = []
        self.n_features_: int | None = None

    def _resolve_max_features(self, d: int) -> int | None:
        if self.max_features is None:
            return None
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(d)))
        return int(self.max_features)

    def fit(self, X, y) -> "RandomForestClassifier":
        X, y = check_training_data(X, y)
        n, d = X.shape
        self.n_features_ = d
        k = self._resolve_max_features(d)
        rng = rng_for(self.seed, "forest")
        self.trees_ = []
        for _ in range(self.n_trees):
            if self.bootstrap:
                idx = rng.integers(0, n, size=n)
                Xt, yt = X[idx], y[idx]
            else:
                Xt, yt = X, y
            feature_rng = rng if (k is not None and k < d) else None
            self.trees_.append(
                grow_gini_tree(
                    Xt,
                    yt,
                    max_depth=self.max_depth,
                    min_samples_split=self.min_samples_split,
                    feature_rng=feature_rng,
                    max_features=k,
                )
            )
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features_)
        votes = np.zeros(len(X))
        for tree in self.trees_:
            votes += tree.predict_value(X) >= 0.5
        return votes / len(self.trees_)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)
