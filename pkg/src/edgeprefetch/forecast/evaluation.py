"""Held-out evaluation: stratified split, accuracy, confusion and correlation matrices."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from edgeprefetch.engine import rng_stream
from edgeprefetch.forecast.features import FEATURE_NAMES, LABEL_NAME, Dataset
from edgeprefetch.forecast.models import TrainedModel

ACCURACY_GATE = 0.75


def stratified_split(y: np.ndarray, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-label shuffled split; returns sorted (train_idx, test_idx)."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = rng_stream(seed, "train-test-split")
    train, test = [], []
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_fraction * len(idx)))
        if len(idx) > 1:
            n_test = min(max(n_test, 1), len(idx) - 1)
        else:
            n_test = 0
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(test, dtype=np.int64))


@dataclass
class ConfusionMatrix:
    labels: np.ndarray
    counts: np.ndarray  # rows: ground truth, columns: predicted

    @property
    def normalized(self) -> np.ndarray:
        support = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = self.counts / support
        return np.where(support > 0, out, 0.0)

    def write_csv(self, path: Path, normalized: bool = False) -> None:
        data = self.normalized if normalized else self.counts
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["true\\pred"] + [repr(float(l)) for l in self.labels])
            for label, row in zip(self.labels, data):
                w.writerow([repr(float(label))] + [repr(float(v)) if normalized else int(v) for v in row])


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, labels: np.ndarray) -> ConfusionMatrix:
    labels = np.asarray(labels, dtype=float)
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    ti = np.searchsorted(labels, y_true)
    pi = np.searchsorted(labels, y_pred)
    np.add.at(counts, (ti, pi), 1)
    return ConfusionMatrix(labels, counts)


@dataclass
class Evaluation:
    kind: str
    accuracy: float
    n_test: int
    majority_baseline: float
    confusion: ConfusionMatrix

    @property
    def passes_gate(self) -> bool:
        return self.accuracy >= ACCURACY_GATE

    def to_dict(self) -> dict:
        return {
            "model": self.kind,
            "accuracy": self.accuracy,
            "n_test": self.n_test,
            "majority_baseline": self.majority_baseline,
            "gate": ACCURACY_GATE,
            "passes_gate": self.passes_gate,
            "labels": self.confusion.labels.tolist(),
            "confusion": self.confusion.counts.tolist(),
        }


def evaluate(model: TrainedModel, test: Dataset, labels: np.ndarray | None = None) -> Evaluation:
    if len(test) == 0:
        raise ValueError("empty test split")
    pred = model.predict(test.X)
    if labels is None:
        labels = np.union1d(model.labels, np.unique(test.y))
    _, counts = np.unique(test.y, return_counts=True)
    return Evaluation(
        kind=model.kind,
        accuracy=float((pred == test.y).mean()),
        n_test=len(test),
        majority_baseline=float(counts.max() / len(test)),
        confusion=confusion_matrix(test.y, pred, labels),
    )


def correlation_matrix(dataset: Dataset) -> tuple[list[str], np.ndarray]:
    """Pearson correlation over features plus label; NaN where a column is constant."""
    if len(dataset) < 2:
        raise ValueError("correlation needs at least two records")
    data = np.column_stack([dataset.X, dataset.y])
    names = FEATURE_NAMES + [LABEL_NAME]
    centered = data - data.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (centered.T @ centered) / np.outer(norms, norms)
    const = norms == 0
    corr[const, :] = np.nan
    corr[:, const] = np.nan
    corr = np.clip(corr, -1.0, 1.0)
    for i in range(len(names)):
        if not const[i]:
            corr[i, i] = 1.0
    return names, corr


def write_correlation_csv(names: list[str], corr: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + names)
        for name, row in zip(names, corr):
            w.writerow([name] + ["" if np.isnan(v) else repr(float(v)) for v in row])


def write_evaluation(ev: Evaluation, out_dir: Path, extra: dict | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = ev.to_dict() | (extra or {})
    (out_dir / "evaluation.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    ev.confusion.write_csv(out_dir / "confusion.csv")
    ev.confusion.write_csv(out_dir / "confusion_normalized.csv", normalized=True)
