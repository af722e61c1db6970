"""Shapelet Transform Classifier with a time-bounded random shapelet search.

The search runs in rounds. Each round asks a running-mean timing model how
many candidates fit in the time left, samples and scores that many, drops
overlapping candidates from the same series and merges the survivors into a
bounded pool. When a round may afford every candidate in the data, the full
space is enumerated instead and the search ends.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from hivecote._base import ComponentClassifier, Deadline, as_series_matrix
from hivecote._kernels import shapelet_distances
from hivecote._kernels import shapelet_distance as _shapelet_distance
from hivecote.base_learners import FeatureMatrix, RotationForest
from hivecote.ts_data import LabeledSeriesSet, z_normalize

__all__ = [
    "Shapelet",
    "ShapeletTimingModel",
    "ShapeletTransformClassifier",
    "StcConfig",
    "build_stc",
    "exhaustive_shapelet_search",
    "information_gain",
    "merge_pool",
    "remove_self_similar",
    "sample_and_evaluate",
    "shapelet_count",
    "shapelet_distance",
    "shapelet_transform",
]


@dataclass(frozen=True, eq=False)
class Shapelet:
    values: np.ndarray
    series_index: int
    start: int
    quality: float
    target_class: int
    order: int = 0  # generation sequence number, used for tie-breaks

    @property
    def length(self):
        return self.values.shape[0]

    @property
    def end(self):
        return self.start + self.length - 1

    def overlaps(self, other: "Shapelet") -> bool:
        return (self.series_index == other.series_index
                and self.start <= other.end and other.start <= self.end)

    def key(self):
        return (self.series_index, self.start, self.length, self.quality, self.target_class)


@dataclass(frozen=True)
class StcConfig:
    max_shapelets: int = 1000
    search_seconds: float = 3600.0
    min_shapelet_length: int = 3
    max_shapelet_length: int | None = None
    budget_schedule: tuple | None = None  # fixed per-round budgets; overrides the clock
    probe_budget: int = 100
    max_round_budget: int = 10_000
    tree_count: int = 200
    group_size: int = 3
    forest_seconds: float | None = None  # optional cap on the rotation forest build
    seed: int | None = None
    contract_seconds: float | None = None  # caps the search time when set

    def __post_init__(self):
        if self.max_shapelets < 1:
            raise ValueError("max_shapelets must be >= 1")
        if self.search_seconds <= 0:
            raise ValueError("search_seconds must be positive")
        if self.min_shapelet_length < 1:
            raise ValueError("min_shapelet_length must be >= 1")


def shapelet_distance(shapelet, series) -> float:
    """Smallest length-normalised squared distance between the shapelet and any
    z-normalised window of ``series``."""
    values = shapelet.values if isinstance(shapelet, Shapelet) else shapelet
    values = np.ascontiguousarray(values, dtype=np.float64)
    series = np.ascontiguousarray(series, dtype=np.float64)
    if values.shape[0] > series.shape[0]:
        raise ValueError("shapelet longer than series")
    return float(_shapelet_distance(values, series))


def _entropy2(pos, total):
    if total == 0:
        return 0.0
    p = pos / total
    out = 0.0
    for q in (p, 1.0 - p):
        if q > 0:
            out -= q * np.log2(q)
    return out


def information_gain(distances, labels, positive_class):
    """Best one-vs-all entropy gain over thresholds between sorted distances.

    Returns ``(gain, threshold)``; the lowest threshold wins ties (within
    1e-12). Cases with
    distance at or below the threshold fall on the left.
    """
    d = np.asarray(distances, dtype=np.float64)
    pos = np.asarray(labels) == positive_class
    n = d.shape[0]
    if n < 2:
        raise ValueError("need at least two cases")
    n_pos = int(pos.sum())
    if n_pos == 0 or n_pos == n:
        raise ValueError("both the positive class and the rest must be present")
    order = np.argsort(d, kind="mergesort")
    ds = d[order]
    cum_pos = np.cumsum(pos[order])
    cut = np.flatnonzero(ds[1:] > ds[:-1])
    if cut.size == 0:
        return 0.0, float(ds[0])
    nl = cut + 1.0
    nr = n - nl
    pl = cum_pos[cut]
    pr = n_pos - pl

    def h(p, t):
        out = np.zeros_like(t)
        for part in (p, t - p):
            frac = part / t
            with np.errstate(divide="ignore", invalid="ignore"):
                out -= np.where(part > 0, frac * np.log2(np.where(part > 0, frac, 1.0)), 0.0)
        return out

    gains = _entropy2(n_pos, n) - (nl * h(pl, nl) + nr * h(pr, nr)) / n
    # gains equal up to rounding count as tied, so the lowest threshold wins
    best = int(np.flatnonzero(gains >= gains.max() - 1e-12)[0])
    thr = ds[cut[best]] + (ds[cut[best] + 1] - ds[cut[best]]) / 2.0
    return float(max(gains[best], 0.0)), float(thr)


def shapelet_count(n, m, min_length=3, max_length=None):
    """Number of (series, start, length) candidates in the data."""
    max_length = m if max_length is None else min(max_length, m)
    return n * sum(m - L + 1 for L in range(min_length, max_length + 1))


def _evaluate(X, y, i, start, length, order):
    values = z_normalize(X[i, start:start + length])
    dists = shapelet_distances(values, X)
    gain, _ = information_gain(dists, y, y[i])
    return Shapelet(values, int(i), int(start), gain, int(y[i]), order)


def sample_and_evaluate(train: LabeledSeriesSet, budget, rng, min_length=3, max_length=None,
                        first_order=0, deadline=None):
    """Sample ``budget`` random candidates and score them by information gain.

    A candidate's positive class is the class of the series it came from.
    If ``budget`` covers every candidate in the data, all are enumerated
    once each (series, then length, then start) instead of sampled.
    An expired ``deadline`` cuts the round short.
    Returns ``(shapelets, enumerated_all)``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    X, y = train.series, train.labels
    n, m = X.shape
    hi = m if max_length is None else min(max_length, m)
    if min_length > hi:
        raise ValueError("series shorter than the minimum shapelet length")
    counter = itertools.count(first_order)
    expired = deadline.expired if deadline is not None else (lambda: False)
    out = []
    if budget >= shapelet_count(n, m, min_length, hi):
        for i in range(n):
            for L in range(min_length, hi + 1):
                for s in range(m - L + 1):
                    if expired():
                        return out, False
                    out.append(_evaluate(X, y, i, s, L, next(counter)))
        return out, True
    for _ in range(budget):
        if out and expired():
            break
        i = int(rng.integers(n))
        L = int(rng.integers(min_length, hi + 1))
        s = int(rng.integers(0, m - L + 1))
        out.append(_evaluate(X, y, i, s, L, next(counter)))
    return out, False


def _by_quality(shapelets):
    return sorted(shapelets, key=lambda s: (-s.quality, s.order))


def remove_self_similar(candidates):
    """Greedy pass in quality order: drop a candidate overlapping an already kept
    one from the same series."""
    kept = []
    for s in candidates:
        if not any(s.overlaps(k) for k in kept):
            kept.append(s)
    return kept


def merge_pool(pool, batch, k):
    """Best ``k`` of pool and batch by quality; earlier-generated wins ties."""
    return _by_quality(list(pool) + list(batch))[:k]


def exhaustive_shapelet_search(train: LabeledSeriesSet, k=1000, min_length=3, max_length=None):
    """Pool from scoring every candidate, without any time budget."""
    X, y = train.series, train.labels
    n, m = X.shape
    hi = m if max_length is None else min(max_length, m)
    everything = []
    order = 0
    for i in range(n):
        for L in range(min_length, hi + 1):
            for s in range(m - L + 1):
                everything.append(_evaluate(X, y, i, s, L, order))
                order += 1
    return merge_pool([], remove_self_similar(_by_quality(everything)), k)


def shapelet_transform(data, shapelets) -> FeatureMatrix:
    """Distance from every series (rows) to every shapelet (columns)."""
    if not shapelets:
        raise ValueError("need at least one shapelet")
    X = as_series_matrix(data)
    out = np.empty((X.shape[0], len(shapelets)))
    for j, s in enumerate(shapelets):
        out[:, j] = shapelet_distances(np.ascontiguousarray(s.values), X)
    labels = data.labels if isinstance(data, LabeledSeriesSet) else np.zeros(X.shape[0], dtype=np.int64)
    c = data.class_count if isinstance(data, LabeledSeriesSet) else None
    return FeatureMatrix(out, labels, c)


@dataclass
class ShapeletTimingModel:
    """Running mean of seconds spent per evaluated shapelet."""

    evaluated: int = 0
    seconds: float = 0.0
    history: list = field(default_factory=list)

    def update(self, count, seconds):
        self.evaluated += count
        self.seconds += seconds
        self.history.append((count, seconds))

    @property
    def per_shapelet(self):
        if self.evaluated == 0:
            return None
        return max(self.seconds / self.evaluated, 1e-9)

    def budget(self, remaining, probe, cap):
        if self.per_shapelet is None:
            return probe
        return int(min(cap, max(1, remaining / self.per_shapelet)))


class ShapeletTransformClassifier(ComponentClassifier):
    """STC: bounded shapelet search, shapelet transform, rotation forest.

    Attributes
    ----------
    shapelets_ : list of Shapelet
        Pool sorted by quality, best first.
    forest_ : RotationForest
    search_seconds_ : float
        Wall time spent in the search rounds.
    """

    name = "STC"

    def __init__(self, config: StcConfig | None = None):
        super().__init__(config or StcConfig())

    def _contract_seconds(self):
        # the resume loop enforces the search limit; transform and forest follow it
        if self.config.budget_schedule is not None:
            return None
        return self.search_limit()

    def search_limit(self):
        t = self.config.search_seconds
        if self.config.contract_seconds is not None:
            t = min(t, self.config.contract_seconds)
        return t

    def _begin(self, train):
        if train.series_length < self.config.min_shapelet_length:
            raise ValueError("series shorter than the minimum shapelet length")
        self._train = train
        self.shapelets_ = []
        self.timing_ = ShapeletTimingModel()
        self.rounds_ = 0
        self.enumerated_all_ = False
        self._next_order = 0

    def _has_more_units(self):
        if self.enumerated_all_:
            return False
        sched = self.config.budget_schedule
        return sched is None or self.rounds_ < len(sched)

    def _round_budget(self, deadline: Deadline):
        sched = self.config.budget_schedule
        if sched is not None:
            return int(sched[self.rounds_])
        return self.timing_.budget(max(0.0, deadline.remaining()), self.config.probe_budget,
                                   self.config.max_round_budget)

    def _build_unit(self, deadline):
        budget = self._round_budget(deadline)
        started = time.perf_counter()
        batch, everything = sample_and_evaluate(
            self._train, budget, self.rng_, self.config.min_shapelet_length,
            self.config.max_shapelet_length, first_order=self._next_order,
            deadline=None if self.config.budget_schedule is not None else deadline,
        )
        self.timing_.update(len(batch), time.perf_counter() - started)
        self._next_order += len(batch)
        batch = remove_self_similar(_by_quality(batch))
        if everything:
            # the full space supersedes whatever earlier rounds sampled
            self.shapelets_ = merge_pool([], batch, self.config.max_shapelets)
            self.enumerated_all_ = True
        else:
            self.shapelets_ = merge_pool(self.shapelets_, batch, self.config.max_shapelets)
        self.rounds_ += 1

    def _finish(self):
        self.search_seconds_ = self.build_seconds_
        train = self._train
        del self._train
        self.transformed_ = shapelet_transform(train, self.shapelets_)
        self.forest_ = self.new_forest().fit(self.transformed_, self.rng_)

    def new_forest(self, contract_seconds=None):
        """Unfitted rotation forest with this classifier's settings."""
        if contract_seconds is None:
            contract_seconds = self.config.forest_seconds
        return RotationForest(self.config.tree_count, self.config.group_size,
                              contract_seconds=contract_seconds)

    def transform(self, X):
        return shapelet_transform(as_series_matrix(X, self.series_length_), self.shapelets_).rows

    def predict_proba(self, X):
        return self.forest_.predict_proba(self.transform(X))


def build_stc(train: LabeledSeriesSet, config: StcConfig | None = None) -> ShapeletTransformClassifier:
    return ShapeletTransformClassifier(config).fit(train)
