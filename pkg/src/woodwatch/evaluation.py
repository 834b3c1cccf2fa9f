"""Splits, cross-validation, metrics, and the comparative model report.

The positive class is Infested throughout, so recall directly measures the
miss rate that matters for intervention. Degenerate precision/recall (no
predicted or no actual positives) are defined as 0 to keep fold aggregation
total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDatasetError, WoodwatchError
from .features import FeatureSet
from .models import ModelKind, TrainConfig, build_model, model_inputs, predict, train


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with Infested as the positive class."""

    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn}

    def to_csv(self) -> str:
        # rows = actual (clean, infested), columns = predicted (clean, infested)
        return (
            "actual\\predicted,clean,infested\n"
            f"clean,{self.tn},{self.fp}\n"
            f"infested,{self.fn},{self.tp}\n"
        )


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class CvReport:
    fold_reports: list[MetricReport]
    mean_accuracy: float
    std_accuracy: float

    def to_dict(self) -> dict:
        return {
            "folds": [r.to_dict() for r in self.fold_reports],
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
        }


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _class_indices(labels: np.ndarray) -> dict[int, np.ndarray]:
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise InvalidDatasetError("dataset must contain both classes")
    return {int(c): np.flatnonzero(labels == c) for c in classes}


def stratified_split(labels: np.ndarray, ratio: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-class round-half-up test allocation (at least 1), seeded shuffle within class.

    Returns sorted (train_indices, test_indices); disjoint and exhaustive.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    by_class = _class_indices(labels)
    train_parts, test_parts = [], []
    for cls in sorted(by_class):
        members = rng.permutation(by_class[cls])
        n_test = max(1, _round_half_up(len(members) * ratio))
        if n_test >= len(members):
            raise InvalidDatasetError(f"class {cls} too small for test ratio {ratio}")
        test_parts.append(members[:n_test])
        train_parts.append(members[n_test:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def kfold_indices(labels: np.ndarray, k: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold: per class, seeded shuffle then contiguous chunks.

    Chunk sizes differ by at most one, so stratification is preserved within
    +-1 per class. Test folds are pairwise disjoint and exhaustive.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    by_class = _class_indices(labels)
    for cls, members in by_class.items():
        if len(members) < k:
            raise InvalidDatasetError(f"class {cls} has {len(members)} samples, fewer than k={k}")
    rng = np.random.default_rng(seed)
    fold_members: list[list[np.ndarray]] = [[] for _ in range(k)]
    for cls in sorted(by_class):
        members = rng.permutation(by_class[cls])
        base, extra = divmod(len(members), k)
        start = 0
        for fold in range(k):
            size = base + (1 if fold < extra else 0)
            fold_members[fold].append(members[start : start + size])
            start += size
    all_indices = np.arange(len(labels))
    pairs = []
    for fold in range(k):
        test = np.sort(np.concatenate(fold_members[fold]))
        train = np.setdiff1d(all_indices, test)
        pairs.append((train, test))
    return pairs


def confusion_from_predictions(true_labels: np.ndarray, predicted_labels: np.ndarray) -> ConfusionMatrix:
    true_labels = np.asarray(true_labels)
    predicted_labels = np.asarray(predicted_labels)
    if true_labels.shape != predicted_labels.shape or true_labels.size == 0:
        raise ValueError("label arrays must be equal-length and non-empty")
    tp = int(np.sum((true_labels == 1) & (predicted_labels == 1)))
    fn = int(np.sum((true_labels == 1) & (predicted_labels == 0)))
    fp = int(np.sum((true_labels == 0) & (predicted_labels == 1)))
    tn = int(np.sum((true_labels == 0) & (predicted_labels == 0)))
    return ConfusionMatrix(tp=tp, fn=fn, fp=fp, tn=tn)


def metrics_from_confusion(m: ConfusionMatrix) -> MetricReport:
    if m.total < 1:
        raise ValueError("empty confusion matrix")
    accuracy = (m.tp + m.tn) / m.total
    precision = m.tp / (m.tp + m.fp) if (m.tp + m.fp) > 0 else 0.0
    recall = m.tp / (m.tp + m.fn) if (m.tp + m.fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return MetricReport(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


def _fit_and_score(kind: ModelKind, features: FeatureSet, train_idx: np.ndarray,
                   test_idx: np.ndarray, seed: int, cfg: TrainConfig) -> tuple[MetricReport, ConfusionMatrix]:
    inputs, _ = model_inputs(kind, features, train_idx)
    graph = build_model(kind, seed=seed)
    run_cfg = TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size, seed=seed, shuffle=cfg.shuffle)
    train(graph, inputs[train_idx], features.labels[train_idx],
          inputs[test_idx], features.labels[test_idx], run_cfg)
    _, predicted = predict(graph, inputs[test_idx])
    confusion = confusion_from_predictions(features.labels[test_idx], predicted)
    return metrics_from_confusion(confusion), confusion


def crossval_run(kind: ModelKind, features: FeatureSet, k: int = 5, seed: int = 0,
                 cfg: TrainConfig = TrainConfig()) -> CvReport:
    """Independent model per fold, seeded as seed + fold index. Population std."""
    folds = kfold_indices(features.labels, k=k, seed=seed)
    reports = []
    for fold_index, (train_idx, test_idx) in enumerate(folds):
        try:
            report, _ = _fit_and_score(kind, features, train_idx, test_idx, seed + fold_index, cfg)
        except WoodwatchError as exc:
            exc.args = (f"fold {fold_index}: {exc}",)
            raise
        reports.append(report)
    accuracies = np.array([r.accuracy for r in reports])
    return CvReport(
        fold_reports=reports,
        mean_accuracy=float(accuracies.mean()),
        std_accuracy=float(accuracies.std()),  # divisor k
    )


@dataclass
class ComparativeReport:
    """Accuracy and F1 for every model kind over one shared stratified split."""

    rows: dict[str, MetricReport]
    confusions: dict[str, ConfusionMatrix] = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "models": {k: r.to_dict() for k, r in self.rows.items()},
            "confusions": {k: c.to_dict() for k, c in self.confusions.items()},
        }

    def format_table(self) -> str:
        names = {
            "dnn_mean": "DNN (mean MFCC)",
            "cnn": "CNN only",
            "lstm": "LSTM only",
            "cnn_lstm": "CNN-LSTM",
        }
        lines = [f"{'Model':<16} {'Accuracy':>9} {'F1 Score':>9}",
                 f"{'-' * 16} {'-' * 9} {'-' * 9}"]
        for key, report in self.rows.items():
            lines.append(
                f"{names.get(key, key):<16} {report.accuracy * 100:>8.1f}% {report.f1 * 100:>8.1f}%"
            )
        return "\n".join(lines) + "\n"


def comparative_report(features: FeatureSet, seed: int = 0, cfg: TrainConfig = TrainConfig(),
                       ratio: float = 0.2) -> ComparativeReport:
    """Train all four kinds on one shared stratified split and tabulate."""
    train_idx, test_idx = stratified_split(features.labels, ratio=ratio, seed=seed)
    rows: dict[str, MetricReport] = {}
    confusions: dict[str, ConfusionMatrix] = {}
    for kind in ModelKind:
        report, confusion = _fit_and_score(kind, features, train_idx, test_idx, seed, cfg)
        rows[kind.value] = report
        confusions[kind.value] = confusion
    return ComparativeReport(rows=rows, confusions=confusions, seed=seed)
