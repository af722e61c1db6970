"""HIVE-COTE: a CAWPE-weighted ensemble of TSF, RISE, cBOSS and STC.

Each component's class probabilities are scaled by its estimated train
accuracy raised to ``alpha`` and summed; the normalised sums are the
ensemble's probabilities. Train accuracy comes from cross-validation for
TSF, RISE and STC and from cBOSS's own leave-one-out estimate.

Under a total contract ``T`` the sequential build gives every component an
equal slice ``T / k`` that covers its weight estimate as well as its build.
In threaded mode every component gets the full ``T`` and they build
concurrently.
"""

from __future__ import annotations

import hashlib
import io
import pickle
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from hivecote._base import ComponentClassifier, as_series_matrix
from hivecote.base_learners import cross_validated_proba
from hivecote.boss import CBossConfig, ContractableBOSS
from hivecote.rise import RandomIntervalSpectralEnsemble, RiseConfig
from hivecote.stc import ShapeletTransformClassifier, StcConfig
from hivecote.ts_data import LabeledSeriesSet
from hivecote.tsf import TimeSeriesForest, TsfConfig

__all__ = [
    "COMPONENT_NAMES",
    "CheckpointError",
    "FileEnsemble",
    "HiveCote",
    "HiveCoteBuildError",
    "HiveCoteConfig",
    "TrainedComponent",
    "build_from_results_files",
    "build_hive_cote",
    "checkpoint_load",
    "checkpoint_save",
    "combine_probabilities",
    "combine_matrix",
    "combine_scores",
    "component_train_estimate",
    "estimate_component_weight",
    "make_component",
    "predict_hive_cote",
    "tune_alpha",
]

COMPONENT_NAMES = ("TSF", "RISE", "cBOSS", "STC")

_CLASSES = {
    "TSF": (TimeSeriesForest, "tsf"),
    "RISE": (RandomIntervalSpectralEnsemble, "rise"),
    "cBOSS": (ContractableBOSS, "cboss"),
    "STC": (ShapeletTransformClassifier, "stc"),
}

# fractions of a component's slice; the rest absorbs prediction and transform time
_BUILD_SHARE = 0.5  # TSF, RISE: final build, the other half split over the CV folds
_CBOSS_SHARE = 0.8
_STC_SEARCH_SHARE = 0.5
_STC_FOREST_SHARE = 0.2  # final forest, and again for all CV forests together


class HiveCoteBuildError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


# ---------------------------------------------------------------- combination


def combine_probabilities(component_probs, weights, alpha=4.0):
    """Weighted sum of component probability vectors for one case.

    Parameters
    ----------
    component_probs : sequence of array_like, each of length c
    weights : sequence of float
        Non-negative, at least one positive.
    alpha : float, default=4.0

    Returns
    -------
    probabilities : ndarray
        ``sum_i w_i**alpha * q_i`` normalised to sum to one.
    predicted : int
        Argmax, lowest class index on ties.
    """
    probs = np.asarray(component_probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError("component_probs must be a list of equal-length vectors")
    vector = combine_matrix(probs[:, None, :], weights, alpha)[0]
    return vector, int(np.argmax(vector))


def _check_weights(weights, k, alpha):
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (k,):
        raise ValueError(f"expected {k} weights, got {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if not np.any(w > 0):
        raise ValueError("all weights are zero")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return w


def combine_scores(component_probs, weights, alpha=4.0):
    """Unnormalised scores ``sum_i w_i**alpha * q_i``, shape (n, c) from (k, n, c)."""
    probs = np.asarray(component_probs, dtype=np.float64)
    if probs.ndim != 3:
        raise ValueError("expected an array of shape (components, cases, classes)")
    if not np.allclose(probs.sum(axis=2), 1.0, atol=1e-6, rtol=0.0):
        raise ValueError("every probability vector must sum to 1")
    w = _check_weights(weights, probs.shape[0], alpha)
    # 0 ** 0 is 1, so a zero weight would still count when alpha is zero
    scale = np.where(w > 0, w ** alpha, 0.0)
    return np.einsum("k,knc->nc", scale, probs)


def _usable_weights(weights):
    # no component beat zero train accuracy: the estimates carry no information
    w = np.asarray(weights, dtype=np.float64)
    return np.ones_like(w) if w.size and not np.any(w > 0) else w


def combine_matrix(component_probs, weights, alpha=4.0):
    """Batch form of :func:`combine_probabilities`.

    ``component_probs`` has shape (k, n, c); the result has shape (n, c).
    """
    scores = combine_scores(component_probs, weights, alpha)
    return scores / scores.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------- components


@dataclass(frozen=True)
class HiveCoteConfig:
    components: tuple = COMPONENT_NAMES
    alpha: float = 4.0
    contract_seconds: float | None = None
    threaded: bool = False
    cv_folds: int = 10
    seed: int | None = None
    tsf: TsfConfig = TsfConfig()
    rise: RiseConfig = RiseConfig()
    cboss: CBossConfig = CBossConfig()
    stc: StcConfig = StcConfig()

    def __post_init__(self):
        if not self.components:
            raise ValueError("need at least one component")
        unknown = [c for c in self.components if c not in _CLASSES]
        if unknown:
            raise ValueError(f"unknown components {unknown}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.contract_seconds is not None and self.contract_seconds <= 0:
            raise ValueError("contract_seconds must be positive")


@dataclass
class TrainedComponent:
    name: str
    model: object
    train_estimate: float
    estimate_method: str  # "cross-validation" or "internal"
    build_seconds: float
    train_proba: np.ndarray = field(repr=False)
    slice_seconds: float | None = None


def _seeds(seed, count):
    if seed is None:
        return [None] * count
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def make_component(name, config: HiveCoteConfig, seed=None, slice_seconds=None) -> ComponentClassifier:
    """Unfitted component, with its contract derived from ``slice_seconds``."""
    cls, attr = _CLASSES[name]
    cfg = getattr(config, attr)
    if cfg.seed is None and seed is not None:
        cfg = replace(cfg, seed=seed)
    if slice_seconds is not None:
        if name in ("TSF", "RISE"):
            cfg = replace(cfg, contract_seconds=_BUILD_SHARE * slice_seconds)
        elif name == "cBOSS":
            cfg = replace(cfg, contract_seconds=_CBOSS_SHARE * slice_seconds)
        else:
            cfg = replace(cfg, contract_seconds=_STC_SEARCH_SHARE * slice_seconds,
                          forest_seconds=_STC_FOREST_SHARE * slice_seconds)
    return cls(cfg)


def _fold_seconds(component, cv_folds, slice_seconds):
    if slice_seconds is None:
        return None
    if isinstance(component, ShapeletTransformClassifier):
        return _STC_FOREST_SHARE * slice_seconds / cv_folds
    return (1.0 - _BUILD_SHARE) * slice_seconds / cv_folds


def component_train_estimate(component, train: LabeledSeriesSet, cv_folds=10, seed=None,
                             fold_seconds=None):
    """Train-set probability estimates used for the component's weight.

    Returns ``(proba, method)``. cBOSS must already be fitted and reuses its
    members' leave-one-out predictions. STC must already be fitted; the
    cross-validation reuses its shapelet-transformed train matrix and only
    rebuilds the rotation forest. Anything else is cross-validated in full:
    a :class:`ComponentClassifier` is rebuilt per fold with a fold-specific
    seed (and contract ``fold_seconds`` if given), other objects are
    deep-copied and refitted with ``fit(train)``.
    """
    if isinstance(component, ContractableBOSS):
        return component.train_estimate_proba(train), "internal"
    if isinstance(component, ShapeletTransformClassifier):
        def builder(part, rng):
            return component.new_forest(fold_seconds).fit(part, rng)
        return cross_validated_proba(builder, component.transformed_, cv_folds, seed), "cross-validation"
    if isinstance(component, ComponentClassifier):
        def builder(part, rng):
            changes = {"seed": int(rng.integers(2**31))}
            if hasattr(component.config, "contract_seconds"):
                changes["contract_seconds"] = fold_seconds
            return component.with_config(**changes).fit(part)
    else:
        import copy

        def builder(part, rng):
            return copy.deepcopy(component).fit(part)
    return cross_validated_proba(builder, train, cv_folds, seed), "cross-validation"


def estimate_component_weight(component, train: LabeledSeriesSet, cv_folds=10, seed=None) -> float:
    """Estimated train accuracy of ``component`` (see :func:`component_train_estimate`)."""
    proba, _ = component_train_estimate(component, train, cv_folds, seed)
    return float(np.mean(np.argmax(proba, axis=1) == train.labels))


def _build_component(name, train, config, seed, slice_seconds):
    started = time.perf_counter()
    try:
        model = make_component(name, config, seed, slice_seconds).fit(train)
        if model.units_built_ < 1:
            raise HiveCoteBuildError(f"{name} built no base units")
        cv_seed = None if seed is None else seed + 1
        proba, method = component_train_estimate(
            model, train, config.cv_folds, cv_seed,
            _fold_seconds(model, config.cv_folds, slice_seconds),
        )
    except HiveCoteBuildError:
        raise
    except Exception as exc:
        raise HiveCoteBuildError(f"{name} failed to build: {exc}") from exc
    acc = float(np.mean(np.argmax(proba, axis=1) == train.labels))
    return TrainedComponent(name, model, acc, method, time.perf_counter() - started, proba, slice_seconds)


class HiveCote:
    """Fitted or partially fitted HIVE-COTE ensemble.

    ``fit(train, max_components=j)`` stops after ``j`` components in
    sequential mode; the object can then be checkpointed and ``resume``d.

    Attributes
    ----------
    components_ : list of TrainedComponent
    weights_ : ndarray
        Train accuracy estimates, in component order. Prediction falls back
        to equal weights when all of them are zero.
    allocation_ : dict
        Seconds allotted to each component (None without a contract).
    """

    def __init__(self, config: HiveCoteConfig | None = None):
        self.config = config or HiveCoteConfig()

    def fit(self, train: LabeledSeriesSet, max_components=None):
        train.check_training()
        cfg = self.config
        k = len(cfg.components)
        self._train = train
        self.class_count_ = train.class_count
        self.series_length_ = train.series_length
        self.class_names_ = train.class_names
        self.train_labels_ = train.labels
        self.seeds_ = dict(zip(cfg.components, _seeds(cfg.seed, k)))
        if cfg.contract_seconds is None:
            share = None
        else:
            share = cfg.contract_seconds if cfg.threaded else cfg.contract_seconds / k
        self.allocation_ = {name: share for name in cfg.components}
        self.components_ = []
        self.build_seconds_ = 0.0
        self.complete_ = False
        return self.resume(max_components)

    def resume(self, max_components=None):
        if self.complete_:
            return self
        cfg = self.config
        started = time.perf_counter()
        todo = list(cfg.components[len(self.components_):])
        if cfg.threaded:
            with ThreadPoolExecutor(max_workers=len(todo) or 1) as pool:
                futures = [pool.submit(_build_component, name, self._train, cfg, self.seeds_[name],
                                       self.allocation_[name]) for name in todo]
                self.components_.extend(f.result() for f in futures)
        else:
            for name in todo[:max_components]:
                self.components_.append(_build_component(
                    name, self._train, cfg, self.seeds_[name], self.allocation_[name]))
        self.build_seconds_ += time.perf_counter() - started
        if len(self.components_) == len(cfg.components):
            self.complete_ = True
            self.weights_ = np.array([c.train_estimate for c in self.components_])
            del self._train
        return self

    @property
    def component_names(self):
        return [c.name for c in self.components_]

    def component_proba(self, X):
        X = as_series_matrix(X, self.series_length_)
        return np.stack([c.model.predict_proba(X) for c in self.components_])

    def predict_proba(self, X):
        if not self.complete_:
            raise RuntimeError("ensemble build has not finished")
        return combine_matrix(self.component_proba(X), _usable_weights(self.weights_), self.config.alpha)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def train_estimate_proba(self):
        """Ensemble combination of the components' train estimates."""
        return combine_matrix(np.stack([c.train_proba for c in self.components_]),
                              _usable_weights(self.weights_), self.config.alpha)


def build_hive_cote(train: LabeledSeriesSet, config: HiveCoteConfig | None = None) -> HiveCote:
    return HiveCote(config).fit(train)


def predict_hive_cote(ensemble: HiveCote, series):
    """Probability vector and predicted class for one series."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1 or series.shape[0] != ensemble.series_length_:
        raise ValueError(f"expected one series of length {ensemble.series_length_}")
    vector = ensemble.predict_proba(series.reshape(1, -1))[0]
    return vector, int(np.argmax(vector))


# ---------------------------------------------------------------- results files


@dataclass
class FileEnsemble:
    """Combiner built from stored train and test predictions."""

    component_names: list
    weights: np.ndarray
    alpha: float
    test_labels: np.ndarray
    component_test_proba: np.ndarray  # (k, n, c)
    test_proba: np.ndarray
    predictions: np.ndarray

    @property
    def accuracy(self):
        return float(np.mean(self.predictions == self.test_labels))


def _load_component_results(results_root, dataset, fold, component_names, split):
    from hivecote.experiments import read_result, result_path

    if not component_names:
        raise ValueError("need at least one component")
    results = []
    for name in component_names:
        path = result_path(results_root, name, dataset, split, fold)
        if not Path(path).is_file():
            raise FileNotFoundError(f"missing results file {path}")
        results.append(read_result(path))
    sizes = {len(r.rows) for r in results}
    if len(sizes) != 1:
        raise ValueError(f"{split} files disagree on case count: {sorted(sizes)}")
    classes = {r.probabilities.shape[1] for r in results}
    if len(classes) != 1:
        raise ValueError(f"{split} files disagree on class count: {sorted(classes)}")
    truth = results[0].true_labels
    if any(not np.array_equal(r.true_labels, truth) for r in results[1:]):
        raise ValueError(f"{split} files disagree on the true labels")
    return results


def _renormalised(results):
    # printed rows are rounded, so their sums drift past the combiner's tolerance
    probs = np.stack([r.probabilities for r in results])
    return probs / probs.sum(axis=2, keepdims=True)


def build_from_results_files(results_root, dataset, fold, component_names, alpha=4.0) -> FileEnsemble:
    """Combine components from their results files.

    ``fold`` is the zero-based index in the file names. Weights are the
    accuracies of the train files, or all equal if every one is zero;
    every named component must have both files.
    """
    train = _load_component_results(results_root, dataset, fold, component_names, "train")
    test = _load_component_results(results_root, dataset, fold, component_names, "test")
    weights = np.array([r.accuracy for r in train])
    probs = _renormalised(test)
    combined = combine_matrix(probs, _usable_weights(weights), alpha)
    return FileEnsemble(list(component_names), weights, alpha, test[0].true_labels, probs,
                        combined, np.argmax(combined, axis=1))


def tune_alpha(results_root, dataset, fold, component_names, grid=tuple(range(1, 11))):
    """Exponent from ``grid`` with the best combined accuracy on the train files.

    The lowest exponent wins ties.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty alpha grid")
    train = _load_component_results(results_root, dataset, fold, component_names, "train")
    weights = np.array([r.accuracy for r in train])
    probs = _renormalised(train)
    truth = train[0].true_labels
    best, best_acc = None, -1.0
    for a in sorted(grid):
        acc = float(np.mean(np.argmax(combine_matrix(probs, _usable_weights(weights), a), axis=1) == truth))
        if acc > best_acc:
            best, best_acc = a, acc
    return best


# ---------------------------------------------------------------- checkpoints

_MAGIC = b"HCCKPT\x00"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<7sHQ32s")


def checkpoint_save(obj, path):
    """Write a fitted or partially built classifier to ``path``.

    The container holds a magic string, format version, payload length and
    SHA-256 digest ahead of the pickled object, so truncation and corruption
    are caught on load. Random generator states travel inside the pickle.
    """
    payload = pickle.dumps(obj, protocol=pickle.HIGHEST_PROTOCOL)
    header = _HEADER.pack(_MAGIC, CHECKPOINT_VERSION, len(payload), hashlib.sha256(payload).digest())
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    tmp.replace(path)


def checkpoint_load(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated checkpoint header")
    magic, version, length, digest = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    payload = data[_HEADER.size:]
    if len(payload) != length:
        raise CheckpointError(f"{path}: truncated checkpoint ({len(payload)} of {length} bytes)")
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointError(f"{path}: checkpoint checksum mismatch")
    return pickle.load(io.BytesIO(payload))
