import math

import numpy as np


def allocate(counts, total):
    """Integer split of ``total`` proportional to ``counts`` (largest remainder)."""
    counts = np.asarray(counts, dtype=np.float64)
    exact = counts * total / counts.sum()
    base = np.floor(exact).astype(np.int64)
    short = int(total - base.sum())
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return base


def stratified_subsample(labels, proportion, rng):
    """Sorted indices of ceil(proportion * n) cases, class proportions preserved."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    size = min(n, max(1, math.ceil(proportion * n)))
    classes, counts = np.unique(labels, return_counts=True)
    take = np.minimum(allocate(counts, size), counts)
    chosen = []
    for c, k in zip(classes, take):
        members = np.flatnonzero(labels == c)
        chosen.append(rng.choice(members, size=k, replace=False))
    return np.sort(np.concatenate(chosen))
