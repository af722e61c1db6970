"""Shared machinery for contractable, resumable component classifiers."""

from __future__ import annotations

import copy
import time
from dataclasses import replace

import numpy as np

from hivecote.ts_data import LabeledSeriesSet


class Deadline:
    """Wall-clock budget. ``seconds=None`` never expires."""

    def __init__(self, seconds=None):
        self.seconds = seconds
        self.start = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self.start

    def remaining(self):
        if self.seconds is None:
            return float("inf")
        return self.seconds - self.elapsed()

    def expired(self):
        return self.seconds is not None and self.elapsed() >= self.seconds


def as_series_matrix(X, length=None):
    """Coerce a set, matrix or single series to a contiguous (n, m) float array."""
    if isinstance(X, LabeledSeriesSet):
        X = X.series
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError("expected a series or a 2-D series matrix")
    if length is not None and X.shape[1] != length:
        raise ValueError(f"series length {X.shape[1]} does not match training length {length}")
    return np.ascontiguousarray(X)


def vote_fractions(votes, n_classes):
    counts = np.bincount(votes, minlength=n_classes).astype(np.float64)
    return counts / counts.sum()


class ComponentClassifier:
    """Base class for the four components.

    Subclasses build in discrete units (a tree, a parameter sample, a search
    round). ``fit`` runs units until the configured count is reached or the
    contract expires, always building at least one. ``resume`` continues an
    interrupted build, so ``fit(train, max_units=j)`` followed by
    ``resume()`` equals an uninterrupted ``fit`` when no contract is set.
    """

    name = "component"

    def __init__(self, config):
        self.config = config

    def with_config(self, **changes):
        return type(self)(replace(self.config, **changes))

    # hooks -----------------------------------------------------------------
    def _begin(self, train):
        raise NotImplementedError

    def _has_more_units(self):
        raise NotImplementedError

    def _build_unit(self, deadline):
        raise NotImplementedError

    def _finish(self):
        pass

    def _contract_seconds(self):
        return getattr(self.config, "contract_seconds", None)

    # driver ----------------------------------------------------------------
    def fit(self, train: LabeledSeriesSet, max_units=None):
        train.check_training()
        self.class_count_ = train.class_count
        self.series_length_ = train.series_length
        self.rng_ = np.random.default_rng(self.config.seed)
        self.units_built_ = 0
        self.build_seconds_ = 0.0
        self.complete_ = False
        self.stopped_by_contract_ = False
        self._begin(train)
        return self.resume(max_units)

    def resume(self, max_units=None):
        if getattr(self, "complete_", False):
            return self
        contract = self._contract_seconds()
        left = None if contract is None else contract - self.build_seconds_
        deadline = Deadline(left)
        done = 0
        try:
            while self._has_more_units():
                if max_units is not None and done >= max_units:
                    return self
                if self.units_built_ >= 1 and deadline.expired():
                    self.stopped_by_contract_ = True
                    break
                self._build_unit(deadline)
                self.units_built_ += 1
                done += 1
        finally:
            self.build_seconds_ += deadline.elapsed()
        self._finish()
        self.complete_ = True
        return self

    def predict_proba(self, X):
        raise NotImplementedError

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def copy(self):
        return copy.deepcopy(self)
