"""Synthetic two-class problems, each easy for exactly one kind of representation.

Every generator returns ``(train, test)`` with labels fixed by construction.
"""

from __future__ import annotations

import numpy as np

from hivecote.ts_data import LabeledSeriesSet

__all__ = [
    "SYNTHETIC_PROBLEMS",
    "interval_mean_problem",
    "pattern_frequency_problem",
    "planted_shapelet_problem",
    "synthetic_problem",
    "two_frequency_problem",
]


def _labels(rng, n):
    y = np.repeat([0, 1], [n // 2, n - n // 2])
    return y[rng.permutation(n)]


def _split(X, y, n_train, name, extra=None):
    train = LabeledSeriesSet(X[:n_train], y[:n_train], 2, ("0", "1"), name)
    test = LabeledSeriesSet(X[n_train:], y[n_train:], 2, ("0", "1"), name)
    return train, test


def interval_mean_problem(n_train=200, n_test=200, length=50, shift=1.0, seed=0):
    """Class decided by the sign of the mean over positions 10..20."""
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    y = _labels(rng, n)
    X = rng.normal(size=(n, length))
    X[:, 10:21] += np.where(y == 1, shift, -shift)[:, None]
    return _split(X, y, n_train, "IntervalMean")


def two_frequency_problem(n_train=200, n_test=200, length=128, bins=(3, 7), noise=1.0, seed=0):
    """Random-phase sine at frequency bin 3 (class 0) or bin 7 (class 1), plus noise."""
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    y = _labels(rng, n)
    t = np.arange(length)
    freq = np.asarray(bins)[y]
    phase = rng.uniform(0, 2 * np.pi, n)
    X = np.sin(2 * np.pi * freq[:, None] * t / length + phase[:, None])
    X += rng.normal(scale=noise, size=(n, length))
    return _split(X, y, n_train, "TwoFrequency")


def _place(rng, length, width, count):
    """Random non-overlapping start positions."""
    slots = length // width
    chosen = np.sort(rng.choice(slots, size=count, replace=False))
    jitter = rng.integers(0, width - width // 2, size=count) if count else []
    starts = chosen * width
    return [int(min(s + j // 4, length - width)) for s, j in zip(starts, jitter)]


def pattern_frequency_problem(n_train=200, n_test=200, length=128, counts=(1, 5),
                              width=12, amplitude=2.0, drift=0.5, noise=0.05, seed=0):
    """A bump occurs ``counts[0]`` times in class 0 and ``counts[1]`` times in class 1.

    The background is a slow random-phase sine of amplitude ``drift`` plus
    light noise, so windows away from the bumps yield few distinct words.
    """
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    y = _labels(rng, n)
    bump = amplitude * np.sin(np.pi * np.arange(width) / (width - 1))
    t = np.arange(length) / length
    cycles = rng.uniform(0.5, 1.5, (n, 1))
    phase = rng.uniform(0, 2 * np.pi, (n, 1))
    X = drift * np.sin(2 * np.pi * cycles * t + phase) + rng.normal(scale=noise, size=(n, length))
    for i in range(n):
        for s in _place(rng, length, width, counts[y[i]]):
            X[i, s:s + width] += bump
    return _split(X, y, n_train, "PatternFrequency")


def planted_shapelet_problem(n_train=200, n_test=200, length=60, width=15,
                             amplitude=2.5, seed=0, return_locations=False):
    """Class 1 series carry one full sine period of ``width`` points at a random place.

    With ``return_locations`` a third value lists each case's pattern start
    (-1 for class 0), indexed like ``train`` followed by ``test``.
    """
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    y = _labels(rng, n)
    pattern = amplitude * np.sin(2 * np.pi * np.arange(width) / width)
    X = rng.normal(size=(n, length))
    where = np.full(n, -1)
    for i in np.flatnonzero(y == 1):
        s = int(rng.integers(0, length - width + 1))
        X[i, s:s + width] += pattern
        where[i] = s
    train, test = _split(X, y, n_train, "PlantedShapelet")
    if return_locations:
        return train, test, where
    return train, test


SYNTHETIC_PROBLEMS = {
    "IntervalMean": interval_mean_problem,
    "TwoFrequency": two_frequency_problem,
    "PatternFrequency": pattern_frequency_problem,
    "PlantedShapelet": planted_shapelet_problem,
}


def synthetic_problem(name, **kwargs):
    try:
        return SYNTHETIC_PROBLEMS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown synthetic problem {name!r}") from None
