"""Time Series Forest: summary statistics over random intervals, one tree per interval set."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hivecote._base import ComponentClassifier, as_series_matrix, vote_fractions
from hivecote.base_learners import FeatureMatrix, build_time_series_tree
from hivecote.ts_data import Interval, LabeledSeriesSet

__all__ = [
    "TimeSeriesForest",
    "TsfConfig",
    "build_tsf",
    "interval_features",
    "interval_feature_matrix",
    "predict_tsf",
    "sample_interval",
]


@dataclass(frozen=True)
class TsfConfig:
    tree_count: int = 500
    min_interval_length: int = 3
    intervals_per_tree: int | None = None  # floor(sqrt(m)) when None
    seed: int | None = None
    contract_seconds: float | None = None

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be >= 1")
        if self.min_interval_length < 3:
            raise ValueError("min_interval_length must be >= 3")
        if self.intervals_per_tree is not None and self.intervals_per_tree < 1:
            raise ValueError("intervals_per_tree must be >= 1")


def _slope(block):
    """Least-squares slope of each row against positions 0..len-1."""
    length = block.shape[1]
    if length < 2:
        return np.zeros(block.shape[0])
    t = np.arange(length, dtype=np.float64)
    t -= t.mean()
    centred = block - block.mean(axis=1, keepdims=True)
    return centred @ t / (t @ t)


def interval_feature_matrix(X, intervals):
    """(n, 3r) matrix of mean, population std and slope per interval."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty((X.shape[0], 3 * len(intervals)))
    for j, iv in enumerate(intervals):
        block = X[:, iv.slice()]
        out[:, 3 * j] = block.mean(axis=1)
        out[:, 3 * j + 1] = block.std(axis=1)
        out[:, 3 * j + 2] = _slope(block)
    return out


def interval_features(series, interval: Interval):
    """Mean, population standard deviation and slope of one interval."""
    row = interval_feature_matrix(np.asarray(series, dtype=np.float64).reshape(1, -1), [interval])[0]
    return float(row[0]), float(row[1]), float(row[2])


def sample_interval(m, p, rng) -> Interval:
    """Random interval of length at least ``p`` inside a length-``m`` series.

    The start is uniform over every position that leaves room for ``p``
    values, the end uniform over the admissible ends for that start.
    """
    if m <= p:
        return Interval(0, m - 1)
    start = int(rng.integers(0, m - p + 1))
    end = int(rng.integers(start + p - 1, m))
    return Interval(start, end)


class TimeSeriesForest(ComponentClassifier):
    """Forest of time series trees over random-interval summary features.

    Attributes
    ----------
    intervals_ : list of list of Interval
        The ``r`` intervals used by each tree.
    trees_ : list of DecisionTree
    """

    name = "TSF"

    def __init__(self, config: TsfConfig | None = None):
        super().__init__(config or TsfConfig())

    def _begin(self, train):
        m = train.series_length
        self.intervals_per_tree_ = self.config.intervals_per_tree or max(1, math.isqrt(m))
        self._X = train.series
        self._y = train.labels
        self.intervals_ = []
        self.trees_ = []

    def _has_more_units(self):
        return len(self.trees_) < self.config.tree_count

    def _build_unit(self, deadline):
        m = self.series_length_
        ivs = [sample_interval(m, self.config.min_interval_length, self.rng_)
               for _ in range(self.intervals_per_tree_)]
        feats = FeatureMatrix(interval_feature_matrix(self._X, ivs), self._y, self.class_count_)
        self.intervals_.append(ivs)
        self.trees_.append(build_time_series_tree(feats))

    def _finish(self):
        del self._X, self._y

    @property
    def tree_count_(self):
        return len(self.trees_)

    def tree_votes(self, X):
        """(n, trees) matrix of each tree's predicted class."""
        X = as_series_matrix(X, self.series_length_)
        votes = np.empty((X.shape[0], len(self.trees_)), dtype=np.int64)
        for t, (ivs, tree) in enumerate(zip(self.intervals_, self.trees_)):
            votes[:, t] = np.argmax(tree.predict_proba(interval_feature_matrix(X, ivs)), axis=1)
        return votes

    def predict_proba(self, X):
        votes = self.tree_votes(X)
        return np.array([vote_fractions(v, self.class_count_) for v in votes])


def build_tsf(train: LabeledSeriesSet, config: TsfConfig | None = None) -> TimeSeriesForest:
    return TimeSeriesForest(config).fit(train)


def predict_tsf(model: TimeSeriesForest, series) -> np.ndarray:
    return model.predict_proba(np.asarray(series, dtype=np.float64).reshape(1, -1))[0]
