"""Labeled univariate time series sets, file loaders, resampling and normalisation."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from hivecote._kernels import SIGMA_FLOOR, znorm

__all__ = [
    "SIGMA_FLOOR",
    "DataFormatError",
    "Interval",
    "LabeledSeriesSet",
    "load_csv_file",
    "load_dataset_file",
    "load_ts_file",
    "resample",
    "write_ts_file",
    "z_normalize",
]


class DataFormatError(ValueError):
    """Raised when a data file cannot be parsed.

    The message carries the 1-based line number where parsing failed.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class Interval:
    """Inclusive index range ``[start, end]`` of a series."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid interval [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def slice(self) -> slice:
        return slice(self.start, self.end + 1)


@dataclass(frozen=True, eq=False)
class LabeledSeriesSet:
    """n equal-length univariate series with integer labels in ``[0, c)``.

    Parameters
    ----------
    series : array-like of shape (n, m)
    labels : array-like of shape (n,)
    class_count : int, optional
        Defaults to ``max(labels) + 1``.
    class_names : tuple of str, optional
        Original label tokens, index-aligned with the integer labels.
    name : str, optional
        Problem name, carried into results files.
    """

    series: np.ndarray
    labels: np.ndarray
    class_count: int = None
    class_names: tuple = None
    name: str = ""

    def __post_init__(self):
        X = np.array(self.series, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2:
            raise ValueError("series must be a 2-D array of shape (n, m)")
        y = np.asarray(self.labels)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError("labels must be 1-D with one entry per series")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("need at least one series of length >= 1")
        if not np.all(np.isfinite(X)):
            raise ValueError("missing or non-finite values are not supported")
        if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("labels must be integers")
        y = y.astype(np.int64)
        c = self.class_count
        if c is None:
            c = int(y.max()) + 1
        if y.min() < 0 or y.max() >= c:
            raise ValueError(f"labels must lie in [0, {c})")
        names = self.class_names
        if names is None:
            names = tuple(str(i) for i in range(c))
        elif len(names) != c:
            raise ValueError("class_names must have class_count entries")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "series", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_count", int(c))
        object.__setattr__(self, "class_names", tuple(names))

    @property
    def case_count(self) -> int:
        return self.series.shape[0]

    @property
    def series_length(self) -> int:
        return self.series.shape[1]

    def __len__(self):
        return self.case_count

    def subset(self, index) -> "LabeledSeriesSet":
        index = np.asarray(index, dtype=np.int64)
        return LabeledSeriesSet(
            self.series[index], self.labels[index], self.class_count,
            self.class_names, self.name,
        )

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def check_training(self):
        """Raise if some class in ``[0, c)`` has no cases."""
        missing = np.flatnonzero(self.class_counts() == 0)
        if missing.size:
            raise ValueError(f"classes {missing.tolist()} have no training cases")
        return self


def z_normalize(segment) -> np.ndarray:
    """Zero mean, unit population standard deviation.

    Segments whose standard deviation is at most ``SIGMA_FLOOR`` map to zeros.
    """
    x = np.asarray(segment, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("segment must be a non-empty 1-D vector")
    return znorm(np.ascontiguousarray(x))


# --------------------------------------------------------------------------- io


def _parse_values(text, lineno, path):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise DataFormatError("non-numeric value", lineno, path) from None


def _finish(rows, labels, class_names, path, name, first_line):
    if not rows:
        raise DataFormatError("empty file: no data lines", first_line, path)
    m = len(rows[0][1])
    for lineno, values in rows:
        if len(values) != m:
            raise DataFormatError(
                f"ragged series: expected length {m}, found {len(values)}", lineno, path
            )
    lookup = {lab: i for i, lab in enumerate(class_names)}
    y = []
    for (lineno, _), lab in zip(rows, labels):
        if lab not in lookup:
            raise DataFormatError(f"label {lab!r} not in declared class list", lineno, path)
        y.append(lookup[lab])
    X = np.array([v for _, v in rows], dtype=np.float64)
    return LabeledSeriesSet(X, np.array(y), len(class_names), tuple(class_names), name)


def load_ts_file(path) -> LabeledSeriesSet:
    """Read an equal-length univariate ``.ts`` file.

    Labels become the 0-based position of each case's label within the
    ``@classLabel`` list. Case order is preserved.
    """
    path = os.fspath(path)
    name = os.path.splitext(os.path.basename(path))[0]
    class_names = None
    in_data = False
    rows, labels = [], []
    declared_length = None
    lineno = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not in_data:
                if not line.startswith("@"):
                    raise DataFormatError("expected header directive", lineno, path)
                key, _, rest = line.partition(" ")
                key = key.lower()
                rest = rest.strip()
                if key == "@problemname":
                    name = rest
                elif key == "@univariate":
                    if rest.lower() != "true":
                        raise DataFormatError("only univariate data is supported", lineno, path)
                elif key == "@equallength":
                    if rest.lower() != "true":
                        raise DataFormatError("only equal-length data is supported", lineno, path)
                elif key == "@serieslength":
                    try:
                        declared_length = int(rest)
                    except ValueError:
                        raise DataFormatError("bad @seriesLength", lineno, path) from None
                elif key == "@classlabel":
                    parts = rest.split()
                    if not parts or parts[0].lower() != "true" or len(parts) < 2:
                        raise DataFormatError("@classLabel must be 'true' followed by labels", lineno, path)
                    class_names = parts[1:]
                    if len(set(class_names)) != len(class_names):
                        raise DataFormatError("duplicate class labels", lineno, path)
                elif key == "@missing":
                    if rest.lower() != "false":
                        raise DataFormatError("missing values are not supported", lineno, path)
                elif key == "@data":
                    if class_names is None:
                        raise DataFormatError("@data before @classLabel", lineno, path)
                    in_data = True
                elif key in ("@timestamps", "@dimensions", "@targetlabel"):
                    if key == "@timestamps" and rest.lower() != "false":
                        raise DataFormatError("timestamps are not supported", lineno, path)
                else:
                    raise DataFormatError(f"unknown directive {key}", lineno, path)
                continue
            values, sep, lab = line.rpartition(":")
            if not sep:
                raise DataFormatError("data line missing ':<label>'", lineno, path)
            if ":" in values:
                raise DataFormatError("multivariate data is not supported", lineno, path)
            rows.append((lineno, _parse_values(values, lineno, path)))
            labels.append(lab.strip())
    if not in_data:
        raise DataFormatError("malformed header: no @data section", max(lineno, 1), path)
    out = _finish(rows, labels, class_names, path, name, max(lineno, 1))
    if declared_length is not None and declared_length != out.series_length:
        raise DataFormatError(
            f"@seriesLength {declared_length} disagrees with data length {out.series_length}",
            rows[0][0], path,
        )
    return out


def load_csv_file(path, class_names=None) -> LabeledSeriesSet:
    """Read a headerless CSV, one case per line, label in the last column.

    Without ``class_names`` the label list is the sorted set of distinct
    tokens (numeric tokens sort numerically).
    """
    path = os.fspath(path)
    rows, labels = [], []
    lineno = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            values, sep, lab = line.rpartition(",")
            if not sep:
                raise DataFormatError("need at least one value and a label", lineno, path)
            rows.append((lineno, _parse_values(values, lineno, path)))
            labels.append(lab.strip())
    if class_names is None:
        distinct = set(labels)
        try:
            class_names = sorted(distinct, key=float)
        except ValueError:
            class_names = sorted(distinct)
    name = os.path.splitext(os.path.basename(path))[0]
    return _finish(rows, labels, list(class_names), path, name, max(lineno, 1))


def load_dataset_file(path, class_names=None) -> LabeledSeriesSet:
    if os.fspath(path).lower().endswith(".ts"):
        return load_ts_file(path)
    return load_csv_file(path, class_names)


def write_ts_file(data: LabeledSeriesSet, path, problem_name=None):
    """Write ``data`` in ``.ts`` format with full float precision."""
    name = problem_name or data.name or "problem"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"@problemName {name}\n")
        fh.write("@timeStamps false\n@missing false\n")
        fh.write("@univariate true\n@equalLength true\n")
        fh.write(f"@seriesLength {data.series_length}\n")
        fh.write("@classLabel true " + " ".join(data.class_names) + "\n")
        fh.write("@data\n")
        for row, lab in zip(data.series, data.labels):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write(":" + data.class_names[lab] + "\n")


# --------------------------------------------------------------------- resampling


def resample(train: LabeledSeriesSet, test: LabeledSeriesSet, fold: int):
    """Deterministic train/test resample.

    Fold 1 returns the inputs unchanged. Other folds pool both sets and
    redraw, per class, exactly as many training cases of that class as the
    original train set held, using a generator seeded with ``fold``.
    """
    if fold < 1:
        raise ValueError("fold must be >= 1")
    if train.series_length != test.series_length:
        raise ValueError("train and test series lengths differ")
    if train.class_count != test.class_count:
        raise ValueError("train and test class universes differ")
    if fold == 1:
        return train, test
    X = np.vstack([train.series, test.series])
    y = np.concatenate([train.labels, test.labels])
    rng = np.random.default_rng(fold)
    want = train.class_counts()
    train_idx, test_idx = [], []
    for c in range(train.class_count):
        members = np.flatnonzero(y == c)
        members = members[rng.permutation(members.size)]
        train_idx.append(members[: want[c]])
        test_idx.append(members[want[c]:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    make = lambda idx: LabeledSeriesSet(X[idx], y[idx], train.class_count, train.class_names, train.name)
    return make(tr), make(te)
