"""Summary tables and figures for a results directory."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from hivecote.experiments import read_result, score

__all__ = ["collect_results", "write_report"]


def collect_results(results_root, classifiers=None, datasets=None, folds=None):
    """Scan ``{root}/{classifier}/Predictions/{dataset}/{split}Fold{k}.csv``.

    Returns a dict ``(classifier, dataset, fold) -> {split: ClassifierResult}``.
    """
    root = Path(results_root)
    found = defaultdict(dict)
    for path in sorted(root.glob("*/Predictions/*/*Fold*.csv")):
        classifier, dataset = path.parts[-4], path.parts[-2]
        split, _, fold = path.stem.partition("Fold")
        if split not in ("train", "test") or not fold.isdigit():
            continue
        fold = int(fold)
        if classifiers and classifier not in classifiers:
            continue
        if datasets and dataset not in datasets:
            continue
        if folds is not None and fold not in folds:
            continue
        found[(classifier, dataset, fold)][split] = read_result(path)
    return dict(found)


def _summary_rows(results):
    rows = []
    for (classifier, dataset, fold), splits in sorted(results.items()):
        if "test" not in splits:
            continue
        s = score(splits["test"])
        train_acc = splits["train"].accuracy if "train" in splits else float("nan")
        rows.append({
            "classifier": classifier, "dataset": dataset, "fold": fold,
            "accuracy": s.accuracy, "balanced_accuracy": s.balanced_accuracy,
            "train_estimate": train_acc,
            "build_minutes": s.build_minutes, "test_minutes": s.test_minutes,
            "recall": s.recall,
        })
    return rows


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _mean_by(rows, key):
    table = defaultdict(lambda: defaultdict(list))
    for r in rows:
        table[r["dataset"]][r["classifier"]].append(r[key])
    return {d: {c: float(np.mean(v)) for c, v in row.items()} for d, row in table.items()}


def _plot_accuracy(rows, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    means = _mean_by(rows, "accuracy")
    datasets = sorted(means)
    classifiers = sorted({c for row in means.values() for c in row})
    width = 0.8 / len(classifiers)
    x = np.arange(len(datasets))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(datasets) + 2), 3.5))
    for i, c in enumerate(classifiers):
        vals = [means[d].get(c, np.nan) for d in datasets]
        ax.bar(x + (i - (len(classifiers) - 1) / 2) * width, vals, width, label=c)
    ax.set_xticks(x)
    ax.set_xticklabels(datasets, rotation=30, ha="right")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8, ncol=min(len(classifiers), 5), loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _plot_build_time(rows, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_cls = defaultdict(list)
    for r in rows:
        by_cls[r["classifier"]].append(max(r["build_minutes"], 1e-6))
    names = sorted(by_cls)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(names) + 2), 3.5))
    ax.boxplot([by_cls[n] for n in names])
    ax.set_xticks(np.arange(1, len(names) + 1))
    ax.set_xticklabels(names)
    ax.set_yscale("log")
    ax.set_ylabel("build time (minutes)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _plot_train_vs_test(rows, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4.0, 4.0))
    by_cls = defaultdict(list)
    for r in rows:
        if not np.isnan(r["train_estimate"]):
            by_cls[r["classifier"]].append((r["train_estimate"], r["accuracy"]))
    for name, pts in sorted(by_cls.items()):
        pts = np.array(pts)
        ax.scatter(pts[:, 0], pts[:, 1], s=18, label=name)
    ax.plot([0, 1], [0, 1], color="grey", lw=0.8, ls="--")
    ax.set_xlabel("train estimate")
    ax.set_ylabel("test accuracy")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_report(results_root, out_dir, classifiers=None, datasets=None, folds=None):
    """Write ``summary.csv``, ``recall.csv`` and PNG figures; returns the paths written."""
    results = collect_results(results_root, classifiers, datasets, folds)
    rows = _summary_rows(results)
    if not rows:
        raise FileNotFoundError(f"no test results files under {results_root}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = ["classifier", "dataset", "fold", "accuracy", "balanced_accuracy", "train_estimate",
            "build_minutes", "test_minutes"]
    written = [_write_csv(out / "summary.csv", keys, [[r[k] for k in keys] for r in rows])]
    recall_rows = [[r["classifier"], r["dataset"], r["fold"], c, v]
                   for r in rows for c, v in sorted(r["recall"].items())]
    written.append(_write_csv(out / "recall.csv", ["classifier", "dataset", "fold", "class", "recall"],
                              recall_rows))
    written.append(_plot_accuracy(rows, out / "accuracy.png"))
    written.append(_plot_build_time(rows, out / "build_time.png"))
    if any(not np.isnan(r["train_estimate"]) for r in rows):
        written.append(_plot_train_vs_test(rows, out / "train_vs_test.png"))
    return written
