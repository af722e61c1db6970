"""Random Interval Spectral Ensemble.

Each tree sees one random interval, transformed to its power spectrum and
autocorrelation function. Interval lengths are powers of two capped by an
adaptive model of per-tree build time, which keeps contracted builds on
schedule for long series.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from hivecote._base import ComponentClassifier, as_series_matrix, vote_fractions
from hivecote.base_learners import FeatureMatrix, build_random_tree
from hivecote.ts_data import Interval, LabeledSeriesSet

__all__ = [
    "RandomIntervalSpectralEnsemble",
    "RiseConfig",
    "TimingModel",
    "build_rise",
    "choose_interval",
    "predict_rise",
    "spectral_feature_matrix",
    "spectral_features",
]


@dataclass(frozen=True)
class RiseConfig:
    tree_count: int = 500
    min_interval_length: int | None = None  # min(16, m // 2) when None
    max_acf_lags: int = 100
    seed: int | None = None
    contract_seconds: float | None = None

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be >= 1")
        if self.min_interval_length is not None and self.min_interval_length < 2:
            raise ValueError("min_interval_length must be >= 2")


def spectral_feature_matrix(X, max_acf_lags=100):
    """Power spectrum (DC excluded) followed by autocorrelation, row-wise.

    For interval length r the output has ``r // 2 + min(max_acf_lags, r - 1)``
    columns.
    """
    X = np.asarray(X, dtype=np.float64)
    n, r = X.shape
    if r < 2:
        raise ValueError("segments must have length >= 2")
    spectrum = np.fft.rfft(X, axis=1)
    power = (spectrum.real ** 2 + spectrum.imag ** 2)[:, 1:r // 2 + 1]
    lags = min(max_acf_lags, r - 1)
    centred = X - X.mean(axis=1, keepdims=True)
    # zero padding to 2r turns the circular correlation into the linear one
    padded = np.fft.rfft(centred, n=2 * r, axis=1)
    acov = np.fft.irfft(padded.real ** 2 + padded.imag ** 2, n=2 * r, axis=1)[:, :lags + 1]
    energy = (centred ** 2).sum(axis=1)
    acf = np.zeros((n, lags))
    ok = energy > 0
    acf[ok] = acov[ok, 1:] / energy[ok, None]
    return np.hstack([power, acf])


def spectral_features(segment, max_acf_lags=100):
    seg = np.asarray(segment, dtype=np.float64)
    return spectral_feature_matrix(seg.reshape(1, -1), max_acf_lags)[0]


class TimingModel:
    """Least-squares model of per-tree build seconds against ``r log2 r``.

    Predicts zero until two distinct interval lengths have been observed.
    The fitted slope is clamped at zero so predictions never decrease with
    interval length.
    """

    def __init__(self):
        self.lengths = []
        self.seconds = []
        self.intercept = 0.0
        self.slope = 0.0
        self.fitted = False

    @staticmethod
    def _cost(length):
        length = np.asarray(length, dtype=np.float64)
        return length * np.log2(np.maximum(length, 1.0))

    def update(self, length, seconds):
        self.lengths.append(int(length))
        self.seconds.append(float(seconds))
        x = self._cost(self.lengths)
        t = np.asarray(self.seconds)
        if np.unique(x).size < 2:
            self.fitted = False
            return
        slope, intercept = np.polyfit(x, t, 1)
        if slope < 0:
            slope, intercept = 0.0, float(t.mean())
        self.slope, self.intercept = float(slope), float(intercept)
        self.fitted = True

    def predict(self, length):
        if not self.fitted:
            return 0.0
        return max(0.0, self.intercept + self.slope * float(self._cost(length)))


def _powers_of_two(lo, hi):
    out = []
    v = 1
    while v <= hi:
        if v >= lo:
            out.append(v)
        v *= 2
    return out


def choose_interval(tree_index, m, p, timing: TimingModel, remaining, rng, trees_left=1) -> Interval:
    """Interval for tree ``tree_index`` (1-based).

    The first tree spans the whole series. Later trees get a length drawn
    uniformly from the powers of two in ``[p, max]``, where ``max`` is capped
    by ``m`` and by the longest power of two the timing model says fits in an
    equal share (``remaining / trees_left``) of the remaining seconds.
    ``remaining=None`` means no time cap.
    """
    if m < p:
        raise ValueError("series shorter than the minimum interval length")
    if tree_index == 1:
        return Interval(0, m - 1)
    cap = m
    if remaining is not None and timing.fitted:
        share = remaining / max(1, trees_left)
        affordable = [v for v in _powers_of_two(1, m) if timing.predict(v) <= share]
        cap = max(affordable) if affordable else 0
    choices = _powers_of_two(p, cap)
    length = int(choices[rng.integers(len(choices))]) if choices else p
    start = int(rng.integers(0, m - length + 1))
    return Interval(start, start + length - 1)


class RandomIntervalSpectralEnsemble(ComponentClassifier):
    """RISE: random trees on spectral features of single random intervals.

    Attributes
    ----------
    intervals_ : list of Interval
    trees_ : list of DecisionTree
    timing_ : TimingModel
    """

    name = "RISE"

    def __init__(self, config: RiseConfig | None = None):
        super().__init__(config or RiseConfig())

    def _begin(self, train):
        m = train.series_length
        if m < 2:
            raise ValueError("RISE needs series of length >= 2")
        p = self.config.min_interval_length
        if p is None:
            p = max(2, min(16, m // 2))
        self.min_interval_length_ = min(p, m)
        self._X = train.series
        self._y = train.labels
        self.intervals_ = []
        self.trees_ = []
        self.timing_ = TimingModel()

    def _has_more_units(self):
        return len(self.trees_) < self.config.tree_count

    def _build_unit(self, deadline):
        started = time.perf_counter()
        i = len(self.trees_) + 1
        remaining = None if deadline.seconds is None else max(0.0, deadline.remaining())
        iv = choose_interval(
            i, self.series_length_, self.min_interval_length_, self.timing_, remaining,
            self.rng_, trees_left=self.config.tree_count - i + 1,
        )
        feats = spectral_feature_matrix(self._X[:, iv.slice()], self.config.max_acf_lags)
        tree = build_random_tree(FeatureMatrix(feats, self._y, self.class_count_), rng=self.rng_)
        self.intervals_.append(iv)
        self.trees_.append(tree)
        self.timing_.update(iv.length, time.perf_counter() - started)

    def _finish(self):
        del self._X, self._y

    def tree_votes(self, X):
        X = as_series_matrix(X, self.series_length_)
        votes = np.empty((X.shape[0], len(self.trees_)), dtype=np.int64)
        for t, (iv, tree) in enumerate(zip(self.intervals_, self.trees_)):
            feats = spectral_feature_matrix(X[:, iv.slice()], self.config.max_acf_lags)
            votes[:, t] = np.argmax(tree.predict_proba(feats), axis=1)
        return votes

    def predict_proba(self, X):
        votes = self.tree_votes(X)
        return np.array([vote_fractions(v, self.class_count_) for v in votes])


def build_rise(train: LabeledSeriesSet, config: RiseConfig | None = None) -> RandomIntervalSpectralEnsemble:
    return RandomIntervalSpectralEnsemble(config).fit(train)


def predict_rise(model: RandomIntervalSpectralEnsemble, series) -> np.ndarray:
    return model.predict_proba(np.asarray(series, dtype=np.float64).reshape(1, -1))[0]
