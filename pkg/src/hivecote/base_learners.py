"""Tree learners used by the components, plus stratified cross-validation.

Three tree builders share one information-gain split search:

* :func:`build_time_series_tree` examines every attribute at every node,
* :func:`build_random_tree` examines a random subset per node,
* :class:`RotationForest` grows exhaustive trees on PCA-rotated attribute groups.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from hivecote._kernels import (
    best_split,
    best_split_presorted,
    partition,
    tree_leaf_index,
    tree_predict,
    xlogx_table,
)

__all__ = [
    "DecisionTree",
    "FeatureMatrix",
    "RotationForest",
    "build_random_tree",
    "build_rotation_forest",
    "build_time_series_tree",
    "cross_validated_accuracy",
    "cross_validated_proba",
    "stratified_folds",
]


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rectangular n x d attribute table with integer class labels."""

    rows: np.ndarray
    labels: np.ndarray
    class_count: int = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.rows, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] < 1 or X.shape[0] < 1:
            raise ValueError("feature matrix must be n x d with n, d >= 1")
        y = np.asarray(self.labels, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError("one label per row required")
        c = int(y.max()) + 1 if self.class_count is None else int(self.class_count)
        if y.min() < 0 or y.max() >= c:
            raise ValueError("labels out of range")
        object.__setattr__(self, "rows", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_count", c)

    def __len__(self):
        return self.rows.shape[0]

    def subset(self, index):
        return FeatureMatrix(self.rows[index], self.labels[index], self.class_count)


def _attribute_rows(X):
    if isinstance(X, FeatureMatrix):
        X = X.rows
    X = np.ascontiguousarray(X, dtype=np.float64)
    return X.reshape(1, -1) if X.ndim == 1 else X


class DecisionTree:
    """Array-backed binary tree.

    Node ``i`` is a leaf when ``feature[i] == -1``; otherwise cases with
    ``x[feature[i]] <= threshold[i]`` go to ``left[i]``. ``value[i]`` holds
    the class distribution of the training cases that reached the node.
    """

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def node_count(self):
        return self.feature.shape[0]

    @property
    def class_count(self):
        return self.value.shape[1]

    def is_leaf(self, node=0):
        return self.feature[node] < 0

    def leaves(self):
        return np.flatnonzero(self.feature < 0)

    def predict_proba(self, X):
        X = _attribute_rows(X)
        return tree_predict(X, self.feature, self.threshold, self.left, self.right, self.value)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def apply(self, X):
        X = _attribute_rows(X)
        return tree_leaf_index(X, self.feature, self.threshold, self.left, self.right)

    def structure(self):
        """Tuple form used to compare trees for equality."""
        return (
            self.feature.tolist(), self.threshold.tolist(),
            self.left.tolist(), self.right.tolist(), self.value.tolist(),
        )


class _TreeArrays:
    def __init__(self, y, n_classes):
        self.y = y
        self.n_classes = n_classes
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def new_node(self, rows):
        counts = np.bincount(self.y[rows], minlength=self.n_classes).astype(np.float64)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(counts / counts.sum())
        return len(self.feature) - 1

    def splittable(self, node, size):
        return size >= 2 and np.count_nonzero(self.value[node]) > 1

    def set_split(self, node, a, thr, lrows, rrows):
        self.feature[node] = a
        self.threshold[node] = thr
        self.left[node] = self.new_node(lrows)
        self.right[node] = self.new_node(rrows)
        return self.left[node], self.right[node]

    def done(self):
        return DecisionTree(self.feature, self.threshold, self.left, self.right, np.array(self.value))


def _grow(X, y, n_classes, pick_attrs):
    n, d = X.shape
    xlogx = xlogx_table(n)
    t = _TreeArrays(y, n_classes)
    root_rows = np.arange(n, dtype=np.int64)
    stack = [(t.new_node(root_rows), root_rows)]
    while stack:
        node, rows = stack.pop()
        if not t.splittable(node, rows.shape[0]):
            continue
        attrs, min_attrs = pick_attrs(d)
        a, thr, _ = best_split(X, y, rows, attrs, min_attrs, n_classes, xlogx)
        if a < 0:
            continue
        go_left = X[rows, a] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        lnode, rnode = t.set_split(node, a, thr, lrows, rrows)
        # right pushed first so the left subtree is expanded first
        stack.append((rnode, rrows))
        stack.append((lnode, lrows))
    return t.done()


def _grow_exhaustive(X, y, n_classes):
    n, d = X.shape
    xlogx = xlogx_table(n)
    t = _TreeArrays(y, n_classes)
    XT = np.ascontiguousarray(X.T)
    order = np.argsort(XT, axis=1)
    is_left = np.zeros(n, dtype=bool)
    stack = [(t.new_node(order[0]), order)]
    while stack:
        node, order = stack.pop()
        size = order.shape[1]
        if not t.splittable(node, size):
            continue
        a, thr, _ = best_split_presorted(XT, y, order, n_classes, xlogx)
        if a < 0:
            continue
        rows = order[0]
        goes = XT[a, rows] <= thr
        is_left[rows] = goes
        lorder, rorder = partition(order, is_left, int(goes.sum()))
        lnode, rnode = t.set_split(node, a, thr, lorder[0], rorder[0])
        stack.append((rnode, rorder))
        stack.append((lnode, lorder))
    return t.done()


def _as_xy(data):
    if isinstance(data, FeatureMatrix):
        return data.rows, data.labels, data.class_count
    X, y = data
    y = np.asarray(y, dtype=np.int64)
    return np.ascontiguousarray(X, dtype=np.float64), y, int(y.max()) + 1


def build_time_series_tree(data, rng=None) -> DecisionTree:
    """Unpruned tree choosing the best information-gain split over all attributes.

    ``rng`` is accepted for interface symmetry with the random tree; the
    result does not depend on it.
    """
    X, y, c = _as_xy(data)
    return _grow_exhaustive(X, y, c)


def build_random_tree(data, attributes_per_split=None, rng=None) -> DecisionTree:
    """Random-forest style tree: each node scores a fresh random attribute subset.

    When none of the sampled attributes gives positive gain the node keeps
    drawing further attributes until one does or all have been tried.
    """
    X, y, c = _as_xy(data)
    d = X.shape[1]
    if attributes_per_split is None:
        attributes_per_split = max(1, math.isqrt(d))
    if not 1 <= attributes_per_split <= d:
        raise ValueError("attributes_per_split must be in [1, d]")
    rng = np.random.default_rng(rng)
    return _grow(X, y, c, lambda d_: (rng.permutation(d_).astype(np.int64), attributes_per_split))


# ------------------------------------------------------------------ rotation forest


class RotationForest:
    """Rotation forest: PCA-rotated attribute groups feeding exhaustive trees.

    Parameters
    ----------
    tree_count : int, default=200
    group_size : int, default=3
        Attributes per rotation group; a trailing group may be smaller.
    class_proportion : float, default=0.5
        Fraction of classes (at least one) whose cases feed each group's PCA.
    bootstrap_proportion : float, default=0.75
        Bootstrap sample size relative to the selected cases.
    rotation : {"pca", "identity"}, default="pca"
        ``"identity"`` skips PCA; used to check the degenerate case.
    seed : int or Generator, optional
    contract_seconds : float, optional
        Stop adding trees once this much wall time has passed (at least one
        tree is always built).
    """

    def __init__(self, tree_count=200, group_size=3, class_proportion=0.5,
                 bootstrap_proportion=0.75, rotation="pca", seed=None, contract_seconds=None):
        if tree_count < 1 or group_size < 1:
            raise ValueError("tree_count and group_size must be >= 1")
        if rotation not in ("pca", "identity"):
            raise ValueError("rotation must be 'pca' or 'identity'")
        self.tree_count = tree_count
        self.group_size = group_size
        self.class_proportion = class_proportion
        self.bootstrap_proportion = bootstrap_proportion
        self.rotation = rotation
        self.seed = seed
        self.contract_seconds = contract_seconds

    def _rotations(self, X, y, c, rng):
        n, d = X.shape
        perm = rng.permutation(d)
        groups = [perm[i:i + self.group_size] for i in range(0, d, self.group_size)]
        if self.rotation == "identity":
            return [(g, np.eye(len(g))) for g in groups]
        n_sel = max(1, int(round(self.class_proportion * c)))
        by_size = {}
        for gi, g in enumerate(groups):
            by_size.setdefault(len(g), []).append(gi)
        out = [None] * len(groups)
        # groups of equal size are handled as one stacked batch
        for size, members in by_size.items():
            G = len(members)
            cls = np.argsort(rng.random((G, c)), axis=1)[:, :n_sel]
            eligible = np.zeros((G, n), dtype=bool)
            for k in range(n_sel):
                eligible |= y[None, :] == cls[:, k:k + 1]
            n_elig = eligible.sum(axis=1)
            draws = np.maximum(1, np.round(self.bootstrap_proportion * n_elig)).astype(np.int64)
            pvals = eligible / n_elig[:, None]
            weights = np.array([rng.multinomial(draws[i], pvals[i]) for i in range(G)], dtype=np.float64)
            cols = np.array([groups[gi] for gi in members])
            data = X[:, cols].transpose(1, 0, 2)  # G x n x size
            wsum = weights.sum(axis=1)
            mean = np.einsum("gn,gns->gs", weights, data) / wsum[:, None]
            centred = data - mean[:, None, :]
            cov = np.einsum("gn,gns,gnt->gst", weights, centred, centred) / wsum[:, None, None]
            evals, evecs = np.linalg.eigh(cov)
            evecs = evecs[:, :, ::-1]
            flat = np.trace(cov, axis1=1, axis2=2) <= 1e-12
            for j, gi in enumerate(members):
                out[gi] = (groups[gi], np.eye(size) if flat[j] else evecs[j].copy())
        return out

    @staticmethod
    def _rotate(X, rotation):
        return np.hstack([X[:, g] @ V for g, V in rotation])

    def fit(self, data, rng=None):
        X, y, c = _as_xy(data)
        if isinstance(data, FeatureMatrix):
            c = data.class_count
        rng = np.random.default_rng(self.seed if rng is None else rng)
        self.class_count_ = c
        self.n_features_ = X.shape[1]
        self.members_ = []
        started = time.perf_counter()
        for _ in range(self.tree_count):
            if (self.members_ and self.contract_seconds is not None
                    and time.perf_counter() - started >= self.contract_seconds):
                break
            rot = self._rotations(X, y, c, rng)
            tree = build_time_series_tree(FeatureMatrix(self._rotate(X, rot), y, c))
            self.members_.append((rot, tree))
        return self

    def predict_proba(self, X):
        X = _attribute_rows(X)
        total = np.zeros((X.shape[0], self.class_count_))
        for rot, tree in self.members_:
            total += tree.predict_proba(self._rotate(X, rot))
        return total / len(self.members_)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


def build_rotation_forest(data, tree_count=200, group_size=3, rng=None, **kwargs) -> RotationForest:
    return RotationForest(tree_count, group_size, **kwargs).fit(data, rng)


# ---------------------------------------------------------------- cross validation


def stratified_folds(labels, folds, rng):
    """Assign each case a fold in ``[0, folds)``, spreading every class evenly.

    Classes are dealt round-robin after shuffling; the deal position carries
    over between classes so fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if labels.shape[0] < folds:
        raise ValueError("need at least as many cases as folds")
    rng = np.random.default_rng(rng)
    assign = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(members.size)]
        assign[members] = (offset + np.arange(members.size)) % folds
        offset = (offset + members.size) % folds
    return assign


def cross_validated_proba(builder, data, folds=10, rng=None):
    """Held-out class-probability rows from stratified k-fold cross-validation.

    ``builder(train_subset, fold_rng)`` must return an object whose
    ``predict_proba(test_subset)`` yields one probability row per case.
    """
    rng = np.random.default_rng(rng)
    assign = stratified_folds(data.labels, folds, rng)
    proba = np.zeros((len(data), data.class_count))
    for f in range(folds):
        test = np.flatnonzero(assign == f)
        train = np.flatnonzero(assign != f)
        model = builder(data.subset(train), np.random.default_rng(rng.integers(2**63)))
        proba[test] = model.predict_proba(data.subset(test))
    return proba


def cross_validated_accuracy(builder, data, folds=10, rng=None) -> float:
    proba = cross_validated_proba(builder, data, folds, rng)
    return float(np.mean(np.argmax(proba, axis=1) == data.labels))
