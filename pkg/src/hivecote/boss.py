"""Dictionary classifiers: SFA words, the BOSS 1-NN member and the cBOSS ensemble.

Words are stored as integer codes (base ``alphabet_size``, first symbol most
significant) so that bags can be held as dense count matrices over a shared
vocabulary. :func:`series_to_bag` exposes the plain ``{word: count}`` view.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from hivecote._base import ComponentClassifier, as_series_matrix
from hivecote._util import stratified_subsample
from hivecote.ts_data import LabeledSeriesSet

__all__ = [
    "BossMember",
    "BossParams",
    "CBossConfig",
    "ContractableBOSS",
    "boss_distance",
    "boss_parameter_space",
    "build_base_boss",
    "build_cboss",
    "discretise",
    "fit_mcb",
    "predict_cboss",
    "retain_best",
    "series_to_bag",
    "truncated_dft",
    "window_coefficients",
]


@dataclass(frozen=True)
class BossParams:
    word_length: int
    alphabet_size: int
    window_length: int
    normalise: bool

    def __post_init__(self):
        l, a, w = self.word_length, self.alphabet_size, self.window_length
        if l < 2 or l % 2:
            raise ValueError("word_length must be even and >= 2")
        if a < 2:
            raise ValueError("alphabet_size must be >= 2")
        if w < 2 or l > w:
            raise ValueError("need 2 <= word_length <= window_length")
        if l // 2 + int(self.normalise) > w // 2 + 1:
            raise ValueError("window too short for the requested Fourier coefficients")


def truncated_dft(window, l, normalised) -> np.ndarray:
    """First ``l/2`` complex DFT coefficients as interleaved (re, im) pairs.

    The DC coefficient is skipped when ``normalised``. Unnormalised forward
    transform: ``X_k = sum_t x_t exp(-2 pi i k t / w)``.
    """
    x = np.asarray(window, dtype=np.float64)
    first = 1 if normalised else 0
    if l % 2 or l < 2 or l // 2 + first > x.shape[-1] // 2 + 1:
        raise ValueError("window too short for the requested Fourier coefficients")
    return window_coefficients(x.reshape(1, -1), l, normalised)[0]


def window_coefficients(windows, l, normalised):
    """Row-wise :func:`truncated_dft` on an (..., w) array of windows."""
    first = 1 if normalised else 0
    spec = np.fft.rfft(windows, axis=-1)[..., first:first + l // 2]
    out = np.empty(spec.shape[:-1] + (l,))
    out[..., 0::2] = spec.real
    out[..., 1::2] = spec.imag
    return out


def _windows(X, params: BossParams):
    """(n, m-w+1, w) sliding windows, z-normalised per window when requested."""
    win = sliding_window_view(X, params.window_length, axis=1)
    if not params.normalise:
        return win
    mean = win.mean(axis=2, keepdims=True)
    std = win.std(axis=2, keepdims=True)
    flat = std <= 1e-8
    return np.where(flat, 0.0, (win - mean) / np.where(flat, 1.0, std))


def fit_mcb(train, params: BossParams) -> np.ndarray:
    """Equi-depth breakpoints per Fourier slot, shape ``(l, a - 1)``.

    Breakpoint ``j`` of a slot is the ``j / a`` quantile (linear
    interpolation) of that slot's values over every training window.
    """
    X = as_series_matrix(train)
    coeffs = window_coefficients(_windows(X, params), params.word_length, params.normalise)
    coeffs = coeffs.reshape(-1, params.word_length)
    return mcb_from_values(coeffs, params.alphabet_size)


def mcb_from_values(values, alphabet_size):
    """Breakpoints from an (N, slots) value table."""
    q = np.arange(1, alphabet_size) / alphabet_size
    return np.ascontiguousarray(np.quantile(values, q, axis=0).T)


def discretise(coeffs, breakpoints):
    """Symbol per slot: the number of breakpoints at or below the value."""
    return (coeffs[..., :, None] >= breakpoints).sum(axis=-1)


def _encode(symbols, alphabet_size):
    codes = np.zeros(symbols.shape[:-1], dtype=np.int64)
    for k in range(symbols.shape[-1]):
        codes = codes * alphabet_size + symbols[..., k]
    return codes


def _decode(code, l, alphabet_size):
    out = []
    for _ in range(l):
        code, s = divmod(int(code), alphabet_size)
        out.append(s)
    return tuple(reversed(out))


def word_sequences(X, params: BossParams, breakpoints):
    """(n, m-w+1) integer word codes, one per sliding window."""
    coeffs = window_coefficients(_windows(X, params), params.word_length, params.normalise)
    return _encode(discretise(coeffs, breakpoints), params.alphabet_size)


def _numerosity_mask(codes):
    keep = np.ones(codes.shape, dtype=bool)
    keep[:, 1:] = codes[:, 1:] != codes[:, :-1]
    return keep


def series_to_bag(series, params: BossParams, breakpoints) -> dict:
    """``{word: count}`` of one series, consecutive repeats counted once.

    Words are tuples of ``word_length`` symbols in ``[0, alphabet_size)``.
    """
    x = as_series_matrix(series)
    if x.shape[1] < params.window_length:
        raise ValueError("series shorter than the window")
    codes = word_sequences(x, params, breakpoints)
    kept = codes[_numerosity_mask(codes)]
    return {_decode(c, params.word_length, params.alphabet_size): n for c, n in Counter(kept.tolist()).items()}


def boss_distance(query: dict, reference: dict) -> float:
    """Squared Euclidean distance over the words present in ``query`` only."""
    total = 0.0
    for word, count in query.items():
        if count > 0:
            diff = count - reference.get(word, 0)
            total += diff * diff
    return float(total)


def _bag_matrix(codes, vocab):
    """Counts over ``vocab`` plus, per row, the squared counts of unseen words."""
    n = codes.shape[0]
    keep = _numerosity_mask(codes)
    counts = np.zeros((n, vocab.shape[0]))
    outside = np.zeros(n)
    for i in range(n):
        words, freq = np.unique(codes[i][keep[i]], return_counts=True)
        pos = np.searchsorted(vocab, words)
        pos = np.minimum(pos, vocab.shape[0] - 1)
        found = vocab[pos] == words
        counts[i, pos[found]] = freq[found]
        outside[i] = float((freq[~found].astype(np.float64) ** 2).sum())
    return counts, outside


def _distance_matrix(Q, q_outside, R):
    """BOSS distances from every row of Q to every row of R (same vocabulary).

    Only the words present in a query contribute, so each row gathers just
    those columns of R; counts are integers and the sums are exact.
    """
    RT = np.ascontiguousarray(R.T)
    D = np.empty((Q.shape[0], R.shape[0]))
    for i in range(Q.shape[0]):
        support = np.flatnonzero(Q[i])
        diff = RT[support] - Q[i, support, None]
        D[i] = (diff * diff).sum(axis=0) + q_outside[i]
    return D


class BossMember:
    """One BOSS 1-NN classifier: breakpoints, training bags and labels."""

    def __init__(self, params: BossParams):
        self.params = params

    def fit(self, X, y):
        X = as_series_matrix(X)
        if X.shape[1] < self.params.window_length:
            raise ValueError("series shorter than the window")
        self.breakpoints_ = fit_mcb(X, self.params)
        codes = word_sequences(X, self.params, self.breakpoints_)
        self.vocab_ = np.unique(codes[_numerosity_mask(codes)])
        self.bags_, _ = _bag_matrix(codes, self.vocab_)
        self.labels_ = np.asarray(y, dtype=np.int64)
        return self

    def distances(self, X):
        X = as_series_matrix(X)
        codes = word_sequences(X, self.params, self.breakpoints_)
        Q, outside = _bag_matrix(codes, self.vocab_)
        return _distance_matrix(Q, outside, self.bags_)

    def predict(self, X):
        return self.labels_[np.argmin(self.distances(X), axis=1)]

    def loo_predict(self):
        """Leave-one-out 1-NN predictions on the training bags (self-match excluded)."""
        zeros = np.zeros(self.bags_.shape[0])
        D = _distance_matrix(self.bags_, zeros, self.bags_)
        np.fill_diagonal(D, np.inf)
        return self.labels_[np.argmin(D, axis=1)]

    def train_bag(self, i) -> dict:
        l, a = self.params.word_length, self.params.alphabet_size
        row = self.bags_[i]
        return {_decode(self.vocab_[j], l, a): int(row[j]) for j in np.flatnonzero(row)}


def build_base_boss(train: LabeledSeriesSet, params: BossParams) -> BossMember:
    return BossMember(params).fit(train.series, train.labels)


# ------------------------------------------------------------------------ cBOSS


@dataclass(frozen=True)
class CBossConfig:
    max_ensemble_size: int = 50
    parameter_samples: int = 250
    subsample_proportion: float = 0.7
    word_lengths: tuple = (16, 14, 12, 10, 8)
    alphabet_size: int = 4
    min_window: int = 10
    seed: int | None = None
    contract_seconds: float | None = None

    def __post_init__(self):
        if not 1 <= self.max_ensemble_size <= self.parameter_samples:
            raise ValueError("need 1 <= max_ensemble_size <= parameter_samples")
        if not 0 < self.subsample_proportion <= 1:
            raise ValueError("subsample_proportion must lie in (0, 1]")


def boss_parameter_space(m, config: CBossConfig = CBossConfig()):
    """Valid (l, a, w, z) combinations for series length ``m``, in a fixed order."""
    space = []
    for w in range(config.min_window, m + 1):
        for l in config.word_lengths:
            for z in (True, False):
                if l <= w and l // 2 + int(z) <= w // 2 + 1:
                    space.append(BossParams(l, config.alphabet_size, w, z))
    return space


class _Retainer:
    """Keeps at most ``k`` members, replacing the weakest only on strict improvement."""

    def __init__(self, k):
        self.k = k
        self.accuracies = []
        self.items = []
        self.min_acc = math.inf
        self.min_idx = -1
        self.seen = 0

    def offer(self, acc, item):
        if self.seen < self.k:
            self.accuracies.append(acc)
            self.items.append(item)
            if acc < self.min_acc:
                self.min_acc, self.min_idx = acc, len(self.items) - 1
        elif acc > self.min_acc:
            self.accuracies[self.min_idx] = acc
            self.items[self.min_idx] = item
            self.min_idx = int(np.argmin(self.accuracies))
            self.min_acc = self.accuracies[self.min_idx]
        self.seen += 1
        assert len(self.items) <= self.k


def retain_best(accuracies, k, on_step=None):
    """Replay the member retention rule over a sequence of accuracies.

    Returns the positions (into ``accuracies``) of the retained members.
    ``on_step(size)`` is called with the ensemble size after every offer.
    """
    r = _Retainer(k)
    for pos, acc in enumerate(accuracies):
        r.offer(acc, pos)
        if on_step is not None:
            on_step(len(r.items))
    return list(r.items)


class ContractableBOSS(ComponentClassifier):
    """cBOSS: randomly parameterised BOSS members on stratified subsamples.

    Attributes
    ----------
    members_ : list of BossMember
    weights_ : ndarray
        Member train accuracy raised to the fourth power.
    accuracies_ : list of float
    subsamples_ : list of ndarray
        Training-case indices each member was built on.
    """

    name = "cBOSS"

    def __init__(self, config: CBossConfig | None = None):
        super().__init__(config or CBossConfig())

    def _begin(self, train):
        if train.series_length < self.config.min_window:
            raise ValueError(f"cBOSS needs series of length >= {self.config.min_window}")
        space = boss_parameter_space(train.series_length, self.config)
        order = self.rng_.permutation(len(space))[: self.config.parameter_samples]
        self.sampled_params_ = [space[i] for i in order]
        self._train = train
        self._retainer = _Retainer(self.config.max_ensemble_size)
        self.evaluated_accuracies_ = []

    def _has_more_units(self):
        return self._retainer.seen < len(self.sampled_params_)

    def _build_unit(self, deadline):
        params = self.sampled_params_[self._retainer.seen]
        idx = stratified_subsample(self._train.labels, self.config.subsample_proportion, self.rng_)
        member = BossMember(params).fit(self._train.series[idx], self._train.labels[idx])
        loo = member.loo_predict()
        acc = float(np.mean(loo == member.labels_))
        self.evaluated_accuracies_.append(acc)
        self._retainer.offer(acc, (member, idx, loo))

    def _finish(self):
        self.members_ = [m for m, _, _ in self._retainer.items]
        self.subsamples_ = [idx for _, idx, _ in self._retainer.items]
        self.loo_predictions_ = [loo for _, _, loo in self._retainer.items]
        self.accuracies_ = list(self._retainer.accuracies)
        self.weights_ = np.asarray(self.accuracies_) ** 4
        del self._train, self._retainer

    def _weighted_vote(self, votes):
        """votes: (n, members) class ids -> (n, c) normalised weighted scores."""
        n = votes.shape[0]
        scores = np.zeros((n, self.class_count_))
        for j, w in enumerate(self.weights_):
            scores[np.arange(n), votes[:, j]] += w
        total = scores.sum(axis=1, keepdims=True)
        uniform = np.full_like(scores, 1.0 / self.class_count_)
        return np.where(total > 0, scores / np.where(total > 0, total, 1.0), uniform)

    def member_votes(self, X):
        X = as_series_matrix(X, self.series_length_)
        return np.column_stack([m.predict(X) for m in self.members_])

    def predict_proba(self, X):
        return self._weighted_vote(self.member_votes(X))

    def train_estimate_proba(self, train: LabeledSeriesSet):
        """Train-set probabilities without extra builds.

        A member votes its leave-one-out prediction for the cases in its
        subsample and its ordinary prediction for the rest.
        """
        X = as_series_matrix(train, self.series_length_)
        votes = np.empty((X.shape[0], len(self.members_)), dtype=np.int64)
        for j, (member, idx, loo) in enumerate(zip(self.members_, self.subsamples_, self.loo_predictions_)):
            votes[idx, j] = loo
            rest = np.setdiff1d(np.arange(X.shape[0]), idx)
            if rest.size:
                votes[rest, j] = member.predict(X[rest])
        return self._weighted_vote(votes)


def build_cboss(train: LabeledSeriesSet, config: CBossConfig | None = None) -> ContractableBOSS:
    return ContractableBOSS(config).fit(train)


def predict_cboss(model: ContractableBOSS, series) -> np.ndarray:
    return model.predict_proba(np.asarray(series, dtype=np.float64).reshape(1, -1))[0]
