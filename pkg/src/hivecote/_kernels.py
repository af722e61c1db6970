"""Compiled inner loops: normalisation, split search, tree prediction, shapelet distance."""

import numpy as np
from numba import njit

SIGMA_FLOOR = 1e-8
# gains closer than this are treated as equal
GAIN_TOL = 1e-12


@njit(cache=True)
def _mean_std(x, start, length):
    total = 0.0
    for i in range(start, start + length):
        total += x[i]
    mean = total / length
    ss = 0.0
    for i in range(start, start + length):
        d = x[i] - mean
        ss += d * d
    return mean, np.sqrt(ss / length)


@njit(cache=True)
def znorm(x):
    n = x.shape[0]
    out = np.zeros(n)
    mean, std = _mean_std(x, 0, n)
    if std > SIGMA_FLOOR:
        for i in range(n):
            out[i] = (x[i] - mean) / std
    return out


def xlogx_table(n):
    k = np.arange(n + 1, dtype=np.float64)
    out = np.zeros(n + 1)
    out[1:] = k[1:] * np.log2(k[1:])
    return out


@njit(cache=True)
def _scan_attribute(vals, labs, parent, n_classes, xlogx, runs_pure):
    """Best class-boundary cut along one sorted attribute.

    Returns ``(gain, threshold, margin)``; gain is -1 when no cut exists.
    ``runs_pure`` is scratch space of length n.
    """
    n = vals.shape[0]
    # runs of equal values: class of the run, or -1 when mixed
    i = 0
    while i < n:
        j = i
        cls = labs[i]
        while j + 1 < n and vals[j + 1] == vals[i]:
            j += 1
            if labs[j] != cls:
                cls = -1
        for k in range(i, j + 1):
            runs_pure[k] = cls
        i = j + 1
    base = xlogx[n]
    for c in range(n_classes):
        base -= xlogx[int(parent[c])]
    left = np.zeros(n_classes, dtype=np.int64)
    right = np.empty(n_classes, dtype=np.int64)
    for c in range(n_classes):
        right[c] = int(parent[c])
    s_left = 0.0
    s_right = 0.0
    for c in range(n_classes):
        s_right += xlogx[right[c]]
    best_gain = -1.0
    best_thr = 0.0
    best_margin = -1.0
    for i in range(n - 1):
        lab = labs[i]
        s_left += xlogx[left[lab] + 1] - xlogx[left[lab]]
        s_right += xlogx[right[lab] - 1] - xlogx[right[lab]]
        left[lab] += 1
        right[lab] -= 1
        lo = vals[i]
        hi = vals[i + 1]
        if hi <= lo:
            continue
        if runs_pure[i] >= 0 and runs_pure[i] == runs_pure[i + 1]:
            continue
        nl = i + 1
        nr = n - nl
        gain = (base - (xlogx[nl] - s_left) - (xlogx[nr] - s_right)) / n
        margin = hi - lo
        if gain > best_gain + GAIN_TOL or (gain >= best_gain - GAIN_TOL and margin > best_margin):
            best_gain = gain
            best_margin = margin
            thr = lo + (hi - lo) / 2.0
            if thr >= hi:
                thr = lo
            best_thr = thr
    return best_gain, best_thr, best_margin


@njit(cache=True)
def _better(gain, margin, a, best_gain, best_margin, best_attr):
    if best_attr < 0:
        return gain > GAIN_TOL
    if gain > best_gain + GAIN_TOL:
        return True
    if gain >= best_gain - GAIN_TOL:
        if margin > best_margin:
            return True
        if margin == best_margin and a < best_attr:
            return True
    return False


@njit(cache=True)
def best_split(X, y, rows, attrs, min_attrs, n_classes, xlogx):
    """Information-gain split search over ``attrs`` for the cases in ``rows``.

    Attributes are examined in the given order. After ``min_attrs`` of them
    the search stops as soon as a positive-gain split has been found.
    Returns ``(attribute, threshold, gain)``; attribute is -1 when no
    split has positive gain. Equal gains prefer the wider gap between the
    two neighbouring values, then the lower attribute index.
    """
    n = rows.shape[0]
    parent = np.zeros(n_classes)
    for i in range(n):
        parent[y[rows[i]]] += 1.0
    best_attr = -1
    best_thr = 0.0
    best_gain = 0.0
    best_margin = -1.0
    vals = np.empty(n)
    svals = np.empty(n)
    slabs = np.empty(n, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)
    for ai in range(attrs.shape[0]):
        if ai >= min_attrs and best_attr >= 0:
            break
        a = attrs[ai]
        for i in range(n):
            vals[i] = X[rows[i], a]
        order = np.argsort(vals, kind="mergesort")
        for i in range(n):
            svals[i] = vals[order[i]]
            slabs[i] = y[rows[order[i]]]
        gain, thr, margin = _scan_attribute(svals, slabs, parent, n_classes, xlogx, scratch)
        if _better(gain, margin, a, best_gain, best_margin, best_attr):
            best_attr, best_gain, best_thr, best_margin = a, gain, thr, margin
    if best_attr < 0:
        return -1, 0.0, 0.0
    return best_attr, best_thr, best_gain


@njit(cache=True)
def best_split_presorted(XT, y, order, n_classes, xlogx):
    """As :func:`best_split` over every attribute, given per-attribute sorted row ids.

    ``XT`` is the transposed (d x n) attribute table and ``order[a]`` lists
    the node's rows sorted by attribute ``a``.
    """
    d, n = order.shape
    parent = np.zeros(n_classes)
    for i in range(n):
        parent[y[order[0, i]]] += 1.0
    best_attr = -1
    best_thr = 0.0
    best_gain = 0.0
    best_margin = -1.0
    svals = np.empty(n)
    slabs = np.empty(n, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)
    for a in range(d):
        for i in range(n):
            r = order[a, i]
            svals[i] = XT[a, r]
            slabs[i] = y[r]
        gain, thr, margin = _scan_attribute(svals, slabs, parent, n_classes, xlogx, scratch)
        if _better(gain, margin, a, best_gain, best_margin, best_attr):
            best_attr, best_gain, best_thr, best_margin = a, gain, thr, margin
    if best_attr < 0:
        return -1, 0.0, 0.0
    return best_attr, best_thr, best_gain


@njit(cache=True)
def partition(order, is_left, n_left):
    """Split each row of ``order`` into left and right rows, keeping sort order."""
    d, n = order.shape
    lo = np.empty((d, n_left), dtype=np.int64)
    ro = np.empty((d, n - n_left), dtype=np.int64)
    for a in range(d):
        li = 0
        ri = 0
        for i in range(n):
            r = order[a, i]
            if is_left[r]:
                lo[a, li] = r
                li += 1
            else:
                ro[a, ri] = r
                ri += 1
    return lo, ro


@njit(cache=True)
def tree_predict(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty((n, value.shape[1]))
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True)
def tree_leaf_index(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def shapelet_distance(shapelet, series):
    """Minimum length-normalised squared distance to any z-normalised window."""
    length = shapelet.shape[0]
    best = np.inf
    for start in range(series.shape[0] - length + 1):
        mean, std = _mean_std(series, start, length)
        total = 0.0
        if std > SIGMA_FLOOR:
            for k in range(length):
                d = (series[start + k] - mean) / std - shapelet[k]
                total += d * d
                if total >= best:
                    break
        else:
            for k in range(length):
                total += shapelet[k] * shapelet[k]
                if total >= best:
                    break
        if total < best:
            best = total
    return best / length


@njit(cache=True)
def shapelet_distances(shapelet, X):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = shapelet_distance(shapelet, X[i])
    return out
