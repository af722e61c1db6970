import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hivecote.base_learners import (
    FeatureMatrix,
    RotationForest,
    build_random_tree,
    build_rotation_forest,
    build_time_series_tree,
    cross_validated_accuracy,
    cross_validated_proba,
    stratified_folds,
)

TOL = 1e-12


def entropy(y, c):
    if len(y) == 0:
        return 0.0
    p = np.bincount(y, minlength=c) / len(y)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def oracle_split(X, y, c):
    """Best class-boundary midpoint split by direct enumeration.

    Equal gains prefer the wider gap, then the lower attribute, then the
    lower threshold. Returns None when no split has positive gain.
    """
    n, d = X.shape
    parent = entropy(y, c)
    best = None
    for a in range(d):
        v = X[:, a]
        distinct = np.unique(v)
        for lo, hi in zip(distinct[:-1], distinct[1:]):
            left_cls, right_cls = set(y[v == lo]), set(y[v == hi])
            if len(left_cls) == 1 and left_cls == right_cls:
                continue
            mask = v <= lo
            gain = parent - (mask.sum() * entropy(y[mask], c) + (~mask).sum() * entropy(y[~mask], c)) / n
            margin = hi - lo
            if best is None:
                better = gain > TOL
            else:
                better = gain > best[0] + TOL or (gain >= best[0] - TOL and margin > best[1])
            if better:
                best = (gain, margin, a, lo + (hi - lo) / 2)
    return best


def check_tree_against_oracle(tree, X, y, c):
    def visit(node, rows):
        np.testing.assert_allclose(tree.value[node], np.bincount(y[rows], minlength=c) / len(rows))
        expected = oracle_split(X[rows], y[rows], c)
        if tree.is_leaf(node):
            assert expected is None or len(set(y[rows])) == 1
            return
        assert expected is not None
        assert tree.feature[node] == expected[2]
        assert tree.threshold[node] == pytest.approx(expected[3], abs=1e-12)
        go = X[rows, tree.feature[node]] <= tree.threshold[node]
        visit(tree.left[node], rows[go])
        visit(tree.right[node], rows[~go])

    visit(0, np.arange(len(y)))


@st.composite
def small_tables(draw, max_n=12, max_d=4, max_c=3):
    n = draw(st.integers(2, max_n))
    d = draw(st.integers(1, max_d))
    c = draw(st.integers(2, max_c))
    X = np.array(draw(st.lists(st.integers(0, 5), min_size=n * d, max_size=n * d)), dtype=float).reshape(n, d)
    y = np.array(draw(st.lists(st.integers(0, c - 1), min_size=n, max_size=n)))
    return X, y, c


@given(small_tables())
def test_time_series_tree_matches_split_oracle(table):
    X, y, c = table
    tree = build_time_series_tree(FeatureMatrix(X, y, c))
    check_tree_against_oracle(tree, X, y, c)


def test_continuous_tree_matches_oracle():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 5))
    y = (X[:, 1] + 0.5 * X[:, 3] > 0).astype(int)
    check_tree_against_oracle(build_time_series_tree((X, y)), X, y, 2)


def test_single_class_is_one_leaf():
    tree = build_time_series_tree((np.arange(12.0).reshape(4, 3), np.ones(4, dtype=int)))
    assert tree.node_count == 1
    assert tree.value[0].tolist() == [0.0, 1.0]


def test_midpoint_split():
    tree = build_time_series_tree((np.array([[1.0], [2.0], [3.0], [4.0]]), np.array([0, 0, 1, 1])))
    assert tree.threshold[0] == 2.5
    assert tree.is_leaf(tree.left[0]) and tree.is_leaf(tree.right[0])
    assert tree.value[tree.left[0]].tolist() == [1.0, 0.0]
    assert tree.value[tree.right[0]].tolist() == [0.0, 1.0]


@given(small_tables())
def test_leaves_sum_to_one_and_beat_majority(table):
    X, y, c = table
    for tree in (build_time_series_tree((X, y)), build_random_tree(FeatureMatrix(X, y, c), rng=0)):
        np.testing.assert_allclose(tree.value[tree.leaves()].sum(axis=1), 1.0, atol=1e-9)
        acc = np.mean(tree.predict(X) == y)
        assert acc >= np.bincount(y).max() / len(y) - 1e-12


@given(small_tables())
def test_random_tree_with_all_attributes_is_exhaustive(table):
    X, y, c = table
    data = FeatureMatrix(X, y, c)
    full = build_random_tree(data, attributes_per_split=X.shape[1], rng=7)
    assert full.structure() == build_time_series_tree(data).structure()


def test_random_tree_determinism_and_validation():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 9))
    y = (X[:, 0] > 0).astype(int)
    a = build_random_tree((X, y), rng=5)
    b = build_random_tree((X, y), rng=5)
    assert a.structure() == b.structure()
    assert build_random_tree((X, np.zeros(40, dtype=int)), rng=1).node_count == 1
    with pytest.raises(ValueError):
        build_random_tree((X, y), attributes_per_split=10)


def test_rotation_forest_identity_equals_single_tree():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 3))
    y = (X[:, 0] - X[:, 2] > 0.2).astype(int)
    forest = RotationForest(tree_count=3, group_size=3, rotation="identity").fit((X, y), 0)
    single = build_time_series_tree((X, y))
    Xt = rng.normal(size=(200, 3))
    np.testing.assert_array_equal(forest.predict_proba(Xt), single.predict_proba(Xt))


def _oblique_gaussians(seed=0, n=80):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    centre = np.where(y[:, None] == 1, [1.5, 1.5], [-1.5, -1.5])
    return centre + rng.normal(scale=0.5, size=(n, 2)), y


def _linearly_separable(X, y, steps=3600):
    for theta in np.linspace(0, np.pi, steps, endpoint=False):
        proj = X @ np.array([np.cos(theta), np.sin(theta)])
        if proj[y == 0].max() < proj[y == 1].min() or proj[y == 1].max() < proj[y == 0].min():
            return True
    return False


def test_rotation_forest_oblique_toy():
    X, y = _oblique_gaussians()
    assert _linearly_separable(X, y)
    forest = build_rotation_forest(FeatureMatrix(X, y), tree_count=10, group_size=2, rng=0)
    assert np.mean(forest.predict(X) == y) == 1.0


def test_rotation_forest_probabilities_and_flat_groups():
    rng = np.random.default_rng(2)
    X = np.hstack([rng.normal(size=(30, 4)), np.ones((30, 3))])  # last group has no variance
    y = rng.integers(0, 3, 30)
    forest = RotationForest(tree_count=5, group_size=3).fit(FeatureMatrix(X, y, 3), 1)
    p = forest.predict_proba(rng.normal(size=(20, 7)))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    again = RotationForest(tree_count=5, group_size=3).fit(FeatureMatrix(X, y, 3), 1)
    np.testing.assert_array_equal(again.predict_proba(X), forest.predict_proba(X))


def test_rotation_forest_contract_keeps_one_tree():
    X, y = _oblique_gaussians()
    forest = RotationForest(tree_count=50, contract_seconds=1e-9).fit((X, y), 0)
    assert len(forest.members_) == 1


class Constant:
    def __init__(self, cls, c):
        self.cls, self.c = cls, c

    def predict_proba(self, data):
        out = np.zeros((len(data), self.c))
        out[:, self.cls] = 1.0
        return out


def test_cv_constant_predictor():
    y = np.array([0] * 6 + [1] * 4)
    data = FeatureMatrix(np.arange(10.0).reshape(10, 1), y)
    acc = cross_validated_accuracy(lambda part, rng: Constant(0, 2), data, folds=5, rng=0)
    assert acc == 0.6


def test_cv_with_n_folds_is_leave_one_out():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(6, 2))
    y = np.array([0, 1, 0, 1, 0, 1])
    data = FeatureMatrix(X, y)

    def builder(part, _rng):
        return build_time_series_tree((part.rows, part.labels))

    cv = cross_validated_proba(builder, data, folds=6, rng=0)
    for i in range(6):
        keep = np.arange(6) != i
        loo = build_time_series_tree((X[keep], y[keep])).predict_proba(X[i:i + 1])
        np.testing.assert_array_equal(cv[i], loo[0])
    acc = cross_validated_accuracy(builder, data, folds=6, rng=0)
    assert 0.0 <= acc <= 1.0


@given(st.lists(st.integers(0, 3), min_size=10, max_size=60), st.integers(2, 10), st.integers(0, 99))
def test_stratified_folds_balanced(labels, folds, seed):
    labels = np.array(labels)
    assign = stratified_folds(labels, folds, seed)
    sizes = np.bincount(assign, minlength=folds)
    assert sizes.max() - sizes.min() <= 1
    for c in np.unique(labels):
        per = np.bincount(assign[labels == c], minlength=folds)
        assert per.max() - per.min() <= 1
    np.testing.assert_array_equal(assign, stratified_folds(labels, folds, seed))


def test_stratified_folds_validation():
    with pytest.raises(ValueError):
        stratified_folds([0, 1], 1, 0)
    with pytest.raises(ValueError):
        stratified_folds([0, 1], 3, 0)
