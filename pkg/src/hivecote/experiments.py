"""Batch experiments: run one classifier on one dataset fold and store the results.

Results live at ``{results}/{classifier}/Predictions/{dataset}/{split}Fold{k}.csv``
with ``k`` the zero-based fold. Each file has three header lines

    dataset,classifier,split
    free-text parameter string
    accuracy,buildTimeNanos,testTimeNanos

followed by one ``true,predicted,,p0,p1,...`` row per case. Probabilities
are printed to six significant digits.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from hivecote.boss import CBossConfig, ContractableBOSS
from hivecote.hive_cote import HiveCote, HiveCoteConfig, build_from_results_files, component_train_estimate, tune_alpha
from hivecote.rise import RandomIntervalSpectralEnsemble, RiseConfig
from hivecote.stc import ShapeletTransformClassifier, StcConfig
from hivecote.ts_data import LabeledSeriesSet, load_dataset_file, resample
from hivecote.tsf import TimeSeriesForest, TsfConfig

__all__ = [
    "CLASSIFIERS",
    "ClassifierResult",
    "ResultFormatError",
    "RunSpec",
    "ScoreSummary",
    "main",
    "parse_duration",
    "read_result",
    "result_path",
    "run_experiment",
    "score",
    "write_component_results",
    "write_result",
]

NS_PER_HOUR = 3_600_000_000_000
SPLITS = ("train", "test")
_PRINTED_ERROR = 5e-7  # worst rounding error of one printed probability


class ResultFormatError(ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


# ------------------------------------------------------------------ results files


@dataclass
class ClassifierResult:
    dataset: str
    classifier: str
    split: str
    parameters: str
    accuracy: float
    build_time_ns: int
    test_time_ns: int
    true_labels: np.ndarray
    predicted_labels: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        self.true_labels = np.asarray(self.true_labels, dtype=np.int64)
        self.predicted_labels = np.asarray(self.predicted_labels, dtype=np.int64)
        self.probabilities = np.atleast_2d(np.asarray(self.probabilities, dtype=np.float64))

    @classmethod
    def from_probabilities(cls, dataset, classifier, split, parameters, true_labels, probabilities,
                           build_time_ns=0, test_time_ns=0):
        """Result whose predictions are the row argmaxes and accuracy is recomputed."""
        probabilities = np.asarray(probabilities, dtype=np.float64)
        pred = np.argmax(probabilities, axis=1)
        acc = float(np.mean(pred == np.asarray(true_labels)))
        return cls(dataset, classifier, split, parameters, acc, int(build_time_ns), int(test_time_ns),
                   true_labels, pred, probabilities)

    @property
    def rows(self):
        return list(zip(self.true_labels.tolist(), self.predicted_labels.tolist(), self.probabilities))

    def recomputed_accuracy(self):
        return float(np.mean(self.true_labels == self.predicted_labels))

    def validate(self, sum_tolerance=1e-6):
        n = self.true_labels.shape[0]
        if n < 1:
            raise ResultFormatError("a result needs at least one row")
        if self.split not in SPLITS:
            raise ResultFormatError(f"split must be 'train' or 'test', got {self.split!r}")
        for text, what in ((self.dataset, "dataset"), (self.classifier, "classifier")):
            if not text or "," in text or "\n" in text:
                raise ResultFormatError(f"{what} name must be non-empty without commas or newlines")
        if "\n" in self.parameters or "\r" in self.parameters:
            raise ResultFormatError("parameter string must be a single line")
        if self.predicted_labels.shape != (n,) or self.probabilities.shape[0] != n:
            raise ResultFormatError("rows disagree in length")
        c = self.probabilities.shape[1]
        for what, labels in (("true", self.true_labels), ("predicted", self.predicted_labels)):
            if labels.min() < 0 or labels.max() >= c:
                raise ResultFormatError(f"{what} label outside 0..{c - 1}")
        if np.any(self.probabilities < 0) or not np.all(np.isfinite(self.probabilities)):
            raise ResultFormatError("probabilities must be finite and non-negative")
        bad = np.flatnonzero(np.abs(self.probabilities.sum(axis=1) - 1.0) > sum_tolerance)
        if bad.size:
            raise ResultFormatError(f"probabilities of row {bad[0]} do not sum to 1")
        if abs(self.recomputed_accuracy() - self.accuracy) > 1e-12:
            raise ResultFormatError(
                f"stored accuracy {self.accuracy} differs from the rows' {self.recomputed_accuracy()}")
        if self.build_time_ns < 0 or self.test_time_ns < 0:
            raise ResultFormatError("timings must be non-negative")
        return self


def result_path(results_root, classifier, dataset, split, fold):
    """Path of a results file; ``fold`` is zero-based."""
    return Path(results_root) / classifier / "Predictions" / dataset / f"{split}Fold{fold}.csv"


def _fmt_prob(p):
    return format(float(p), ".6g")


def _sum_tolerance(result):
    # rows read back from a file carry the rounding of every printed value
    return 1e-6 + result.probabilities.shape[1] * _PRINTED_ERROR


def format_result(result: ClassifierResult) -> str:
    result.validate(sum_tolerance=_sum_tolerance(result))
    lines = [
        f"{result.dataset},{result.classifier},{result.split}",
        result.parameters,
        f"{result.accuracy!r},{int(result.build_time_ns)},{int(result.test_time_ns)}",
    ]
    for t, p, row in result.rows:
        lines.append(f"{t},{p},," + ",".join(_fmt_prob(v) for v in row))
    return "\n".join(lines) + "\n"


def write_result(result: ClassifierResult, path):
    """Write atomically, creating parent directories."""
    path = Path(path)
    text = format_result(result)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)
    return path


def read_result(path) -> ClassifierResult:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise ResultFormatError("not a text file", path=path) from exc
    if len(lines) < 4:
        raise ResultFormatError("expected three header lines and at least one row",
                                line=len(lines) + 1, path=path)
    head = lines[0].split(",")
    if len(head) != 3:
        raise ResultFormatError("expected 'dataset,classifier,split'", line=1, path=path)
    stats = lines[2].split(",")
    try:
        if len(stats) != 3:
            raise ValueError
        accuracy, build_ns, test_ns = float(stats[0]), int(stats[1]), int(stats[2])
    except ValueError:
        raise ResultFormatError("expected 'accuracy,buildTimeNanos,testTimeNanos'",
                                line=3, path=path) from None
    truth, pred, probs = [], [], []
    for lineno, text in enumerate(lines[3:], start=4):
        if not text.strip():
            continue
        parts = text.split(",")
        try:
            if len(parts) < 4 or parts[2] != "":
                raise ValueError
            truth.append(int(parts[0]))
            pred.append(int(parts[1]))
            probs.append([float(v) for v in parts[3:]])
        except ValueError:
            raise ResultFormatError("expected 'true,predicted,,p0,...'", line=lineno, path=path) from None
        if len(probs[-1]) != len(probs[0]):
            raise ResultFormatError("row has a different class count", line=lineno, path=path)
    result = ClassifierResult(head[0], head[1], head[2], lines[1], accuracy, build_ns, test_ns,
                              truth, pred, probs)
    try:
        result.validate(sum_tolerance=_sum_tolerance(result))
    except ResultFormatError as exc:
        raise ResultFormatError(str(exc), path=path) from None
    return result


# ------------------------------------------------------------------ scoring


@dataclass
class ScoreSummary:
    accuracy: float
    recall: dict  # class -> recall, only for classes present in the rows
    build_hours: float
    test_hours: float

    @property
    def build_minutes(self):
        return self.build_hours * 60.0

    @property
    def test_minutes(self):
        return self.test_hours * 60.0

    @property
    def balanced_accuracy(self):
        return float(np.mean(list(self.recall.values())))


def score(result: ClassifierResult) -> ScoreSummary:
    if len(result.true_labels) < 1:
        raise ValueError("need at least one row")
    recall = {}
    for c in np.unique(result.true_labels):
        mask = result.true_labels == c
        recall[int(c)] = float(np.mean(result.predicted_labels[mask] == c))
    return ScoreSummary(result.recomputed_accuracy(), recall,
                        result.build_time_ns / NS_PER_HOUR, result.test_time_ns / NS_PER_HOUR)


# ------------------------------------------------------------------ experiments

CLASSIFIERS = ("TSF", "RISE", "cBOSS", "STC", "HC")


@dataclass(frozen=True)
class RunSpec:
    data_path: str
    results_path: str
    generate_train_files: bool
    classifier_name: str
    dataset_name: str
    fold: int  # one-based
    contract_seconds: float | None = None
    seed: int | None = None  # defaults to the fold
    threads: int = 1

    def __post_init__(self):
        if self.classifier_name not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {self.classifier_name!r}; choose from {', '.join(CLASSIFIERS)}")
        if self.fold < 1:
            raise ValueError("fold must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.contract_seconds is not None and self.contract_seconds <= 0:
            raise ValueError("contract must be positive")

    @property
    def run_seed(self):
        return self.fold if self.seed is None else self.seed


def make_classifier(name, seed=None, contract_seconds=None, threads=1):
    if name == "TSF":
        return TimeSeriesForest(TsfConfig(seed=seed, contract_seconds=contract_seconds))
    if name == "RISE":
        return RandomIntervalSpectralEnsemble(RiseConfig(seed=seed, contract_seconds=contract_seconds))
    if name == "cBOSS":
        return ContractableBOSS(CBossConfig(seed=seed, contract_seconds=contract_seconds))
    if name == "STC":
        cfg = StcConfig(seed=seed)
        if contract_seconds is not None:
            cfg = replace(cfg, contract_seconds=contract_seconds)
        return ShapeletTransformClassifier(cfg)
    if name == "HC":
        return HiveCote(HiveCoteConfig(seed=seed, contract_seconds=contract_seconds, threaded=threads > 1))
    raise ValueError(f"unknown classifier {name!r}")


def _find_split_file(folder: Path, dataset, split):
    for ext in (".ts", ".csv", ".txt", ""):
        p = folder / f"{dataset}_{split}{ext}"
        if p.is_file():
            return p
    raise FileNotFoundError(f"no {dataset}_{split}[.ts|.csv|.txt] under {folder}")


def load_problem(data_path, dataset):
    folder = Path(data_path) / dataset
    train = load_dataset_file(_find_split_file(folder, dataset, "TRAIN"))
    test = load_dataset_file(_find_split_file(folder, dataset, "TEST"), class_names=train.class_names)
    return train, test


def _parameters(model, spec: RunSpec):
    cfg = getattr(model, "config", None)
    text = f"seed={spec.run_seed};contract={spec.contract_seconds};threads={spec.threads};config={cfg!r}"
    return text.replace("\n", " ")


def run_experiment(spec: RunSpec):
    """Build, test and record one classifier on one fold.

    Returns the paths of the results files. Work is skipped when every
    requested file already exists.
    """
    fold0 = spec.fold - 1
    test_file = result_path(spec.results_path, spec.classifier_name, spec.dataset_name, "test", fold0)
    train_file = result_path(spec.results_path, spec.classifier_name, spec.dataset_name, "train", fold0)
    wanted = [train_file, test_file] if spec.generate_train_files else [test_file]
    if all(p.is_file() for p in wanted):
        return wanted
    train, test = resample(*load_problem(spec.data_path, spec.dataset_name), spec.fold)
    model = make_classifier(spec.classifier_name, spec.run_seed, spec.contract_seconds, spec.threads)
    params = _parameters(model, spec)
    try:
        test_file.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot write results under {spec.results_path}: {exc}") from exc

    started = time.perf_counter_ns()
    model.fit(train)
    build_ns = time.perf_counter_ns() - started
    started = time.perf_counter_ns()
    proba = model.predict_proba(test.series)
    test_ns = time.perf_counter_ns() - started

    if spec.generate_train_files:
        started = time.perf_counter_ns()
        if isinstance(model, HiveCote):
            train_proba = model.train_estimate_proba()
        else:
            train_proba, _ = component_train_estimate(model, train, 10, spec.run_seed + 1)
        estimate_ns = time.perf_counter_ns() - started
        write_result(ClassifierResult.from_probabilities(
            spec.dataset_name, spec.classifier_name, "train", params, train.labels, train_proba,
            build_ns, estimate_ns), train_file)
    write_result(ClassifierResult.from_probabilities(
        spec.dataset_name, spec.classifier_name, "test", params, test.labels, proba,
        build_ns, test_ns), test_file)
    return wanted


def write_component_results(ensemble: HiveCote, test: LabeledSeriesSet, results_root, dataset, fold):
    """Write train and test results files for every component of a fitted ensemble.

    ``fold`` is zero-based. Train rows are the estimates the ensemble's
    weights came from, so a from-file build reproduces the ensemble.
    """
    paths = []
    for comp in ensemble.components_:
        started = time.perf_counter_ns()
        proba = comp.model.predict_proba(test.series)
        test_ns = time.perf_counter_ns() - started
        build_ns = int(comp.build_seconds * 1e9)
        params = f"member of HC;config={comp.model.config!r}"
        for split, labels, p, t in (("train", ensemble.train_labels_, comp.train_proba, 0),
                                    ("test", test.labels, proba, test_ns)):
            path = result_path(results_root, comp.name, dataset, split, fold)
            write_result(ClassifierResult.from_probabilities(dataset, comp.name, split, params, labels, p,
                                                             build_ns, t), path)
            paths.append(path)
    return paths


# ------------------------------------------------------------------ command line

_DURATION = re.compile(r"(\d+(?:\.\d*)?)\s*(ms|s|m|h|d)?", re.IGNORECASE)
_UNIT_SECONDS = {"ms": 1e-3, "s": 1.0, "m": 60.0, "h": 3600.0, "d": 86400.0, None: 1.0}


def parse_duration(text) -> float:
    """Seconds in a duration such as ``90``, ``45s``, ``15m``, ``1h30m`` or ``2.5h``."""
    text = str(text).strip()
    pos, total = 0, 0.0
    while pos < len(text):
        m = _DURATION.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"bad duration {text!r}")
        unit = m.group(2).lower() if m.group(2) else None
        total += float(m.group(1)) * _UNIT_SECONDS[unit]
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    if not text or total <= 0:
        raise ValueError(f"bad duration {text!r}")
    return total


def _flag_bool(text):
    value = str(text).strip().lower()
    if value in ("true", "t", "yes", "y", "1"):
        return True
    if value in ("false", "f", "no", "n", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _names(text):
    return [t for t in str(text).split(",") if t]


ENV_PREFIX = "HIVECOTE_"


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _add_common(p, classifier_list=False):
    # string defaults from the environment go through ``type`` like typed flags
    p.add_argument("-rp", dest="results_path", default=_env("RP"), help="results directory")
    p.add_argument("-dn", dest="dataset_name", default=_env("DN"),
                   type=_names if classifier_list else str, help="dataset name")
    p.add_argument("-f", dest="fold", type=int, default=_env("F"), help="one-based fold")


def _run_parser():
    p = argparse.ArgumentParser(prog="hivecote", description="Run one classifier on one dataset fold.")
    p.add_argument("-dp", dest="data_path", default=_env("DP"), help="data directory")
    _add_common(p)
    p.add_argument("-gtf", dest="generate_train_files", type=_flag_bool, default=_env("GTF", "false"),
                   help="also write train estimates (true/false)")
    p.add_argument("-cn", dest="classifier_name", default=_env("CN"), help="|".join(CLASSIFIERS))
    p.add_argument("--contract", type=parse_duration, default=_env("CONTRACT"), help="e.g. 90s, 15m, 1h")
    p.add_argument("--seed", type=int, default=_env("SEED"), help="random seed (default: fold)")
    p.add_argument("--threads", type=int, default=_env("THREADS", "1"),
                   help="HC builds its components in parallel when > 1")
    return p


def _ensemble_parser():
    p = argparse.ArgumentParser(prog="hivecote ensemble",
                                description="Combine stored component results into a HIVE-COTE results file.")
    _add_common(p, classifier_list=False)
    p.add_argument("-cn", dest="components", type=_names, default=_env("CN", "TSF,RISE,cBOSS,STC"),
                   help="comma-separated component names")
    p.add_argument("--alpha", type=float, default=4.0)
    p.add_argument("--tune-alpha", action="store_true", help="pick alpha in 1..10 on the train files")
    p.add_argument("--name", default="HIVE-COTE", help="classifier name for the output file")
    return p


def _report_parser():
    p = argparse.ArgumentParser(prog="hivecote report",
                                description="Summarise results files as CSV tables and figures.")
    _add_common(p, classifier_list=True)
    p.add_argument("-cn", dest="classifiers", type=_names, default=_env("CN"),
                   help="comma-separated classifier names (default: all found)")
    p.add_argument("--out", default=None, help="output directory (default: <rp>/report)")
    return p


def _require(parser, args, *names):
    missing = [n for n in names if getattr(args, n) in (None, "")]
    if missing:
        parser.error("missing " + ", ".join(missing))


def _cmd_run(argv):
    parser = _run_parser()
    args = parser.parse_args(argv)
    _require(parser, args, "data_path", "results_path", "classifier_name", "dataset_name", "fold")
    try:
        spec = RunSpec(args.data_path, args.results_path, args.generate_train_files, args.classifier_name,
                       args.dataset_name, args.fold, args.contract, args.seed, args.threads)
    except ValueError as exc:
        parser.error(str(exc))
    for path in run_experiment(spec):
        print(path)
    return 0


def _cmd_ensemble(argv):
    parser = _ensemble_parser()
    args = parser.parse_args(argv)
    _require(parser, args, "results_path", "dataset_name", "fold")
    fold0 = args.fold - 1
    alpha = args.alpha
    if args.tune_alpha:
        alpha = tune_alpha(args.results_path, args.dataset_name, fold0, args.components)
    ens = build_from_results_files(args.results_path, args.dataset_name, fold0, args.components, alpha)
    params = f"fromFile;alpha={alpha};components={'+'.join(args.components)}"
    out = write_result(ClassifierResult.from_probabilities(
        args.dataset_name, args.name, "test", params, ens.test_labels, ens.test_proba), result_path(
        args.results_path, args.name, args.dataset_name, "test", fold0))
    print(f"{out}\naccuracy={ens.accuracy:.6f} alpha={alpha}")
    return 0


def _cmd_report(argv):
    from hivecote.report import write_report

    parser = _report_parser()
    args = parser.parse_args(argv)
    _require(parser, args, "results_path")
    folds = None if args.fold is None else [args.fold - 1]
    out = args.out or os.path.join(args.results_path, "report")
    for path in write_report(args.results_path, out, classifiers=args.classifiers,
                             datasets=args.dataset_name, folds=folds):
        print(path)
    return 0


COMMANDS = {"run": _cmd_run, "ensemble": _cmd_ensemble, "report": _cmd_report}


def main(argv=None):
    """Entry point. ``hivecote [run|ensemble|report] -flag=value ...``; ``run`` is the default."""
    argv = list(sys.argv[1:] if argv is None else argv)
    command = "run"
    if argv and argv[0] in COMMANDS:
        command = argv.pop(0)
    try:
        return COMMANDS[command](argv)
    except (FileNotFoundError, ValueError, OSError) as exc:
        print(f"hivecote {command}: error: {exc}", file=sys.stderr)
        return 1
