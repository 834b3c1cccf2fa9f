"""The four classifier architectures and their shared training loop.

``dnn_mean`` consumes 40-dim time-mean feature vectors; the three sequence
models consume standardized [T, 40] coefficient matrices. All end in a
two-way softmax head. Training is mini-batch Adam with per-epoch seeded
shuffling and is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingDivergedError
from .features import FeatureSet, StandardizeStats, apply_standardize, fit_standardize
from .nn import (
    Adam,
    Conv1D,
    Dense,
    Dropout,
    GlobalAvgPool1D,
    LSTM,
    MaxPool1D,
    ModelGraph,
    ReLU,
    Softmax,
    softmax_cross_entropy,
)

N_CLASSES = 2


class ModelKind(str, enum.Enum):
    DNN_MEAN = "dnn_mean"
    CNN = "cnn"
    LSTM = "lstm"
    CNN_LSTM = "cnn_lstm"


@dataclass(frozen=True)
class GraphDims:
    """Architecture sizes; the defaults are the published configuration."""

    n_features: int = 40
    dense_units: tuple[int, ...] = (256, 128, 64)
    conv1_filters: int = 32
    conv1_kernel: int = 5
    conv2_filters: int = 64
    conv2_kernel: int = 3
    pool_width: int = 2
    lstm_hidden: int = 64
    head_units: int = 64
    dropout: float = 0.3


#: Reduced sizes for gradient diagnostics (keeps graphs under 10^4 parameters).
TOY_DIMS = GraphDims(
    dense_units=(24, 12, 8),
    conv1_filters=6,
    conv2_filters=8,
    lstm_hidden=8,
    head_units=12,
)


def build_model(kind: ModelKind, seed: int = 0, dims: GraphDims = GraphDims()) -> ModelGraph:
    """Construct an initialized graph. All weights come from one generator
    seeded here, drawn in layer order."""
    rng = np.random.default_rng(seed)
    kind = ModelKind(kind)
    drop = dims.dropout
    layers = []
    if kind is ModelKind.DNN_MEAN:
        in_dim = dims.n_features
        for units in dims.dense_units:
            layers += [Dense(in_dim, units, rng), ReLU(), Dropout(drop)]
            in_dim = units
        layers += [Dense(in_dim, N_CLASSES, rng), Softmax()]
        return ModelGraph(layers)

    if kind in (ModelKind.CNN, ModelKind.CNN_LSTM):
        layers += [
            Conv1D(dims.n_features, dims.conv1_filters, dims.conv1_kernel, rng), ReLU(),
            MaxPool1D(dims.pool_width),
            Conv1D(dims.conv1_filters, dims.conv2_filters, dims.conv2_kernel, rng), ReLU(),
            MaxPool1D(dims.pool_width),
        ]
        if kind is ModelKind.CNN:
            layers.append(GlobalAvgPool1D())
            head_in = dims.conv2_filters
        else:
            layers.append(LSTM(dims.conv2_filters, dims.lstm_hidden, rng))
            head_in = dims.lstm_hidden
    else:  # pure LSTM
        layers.append(LSTM(dims.n_features, dims.lstm_hidden, rng))
        head_in = dims.lstm_hidden

    layers += [
        Dense(head_in, dims.head_units, rng), ReLU(), Dropout(drop),
        Dense(dims.head_units, N_CLASSES, rng), Softmax(),
    ]
    return ModelGraph(layers)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
        }


def _onehot(labels: np.ndarray) -> np.ndarray:
    out = np.zeros((len(labels), N_CLASSES))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _eval_pass(graph: ModelGraph, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    logits = graph.forward_logits(x, train=False)
    loss, probs, _ = softmax_cross_entropy(logits, _onehot(y))
    accuracy = float((probs.argmax(axis=1) == y).mean())
    return loss, accuracy


def train(graph: ModelGraph, x_train: np.ndarray, y_train: np.ndarray,
          x_val: np.ndarray, y_val: np.ndarray, cfg: TrainConfig = TrainConfig()) -> TrainHistory:
    """Train in place; returns the per-epoch history.

    One generator seeded with cfg.seed drives both the per-epoch shuffle
    and the dropout masks, so identical seeds give bit-identical parameters.
    Training loss/accuracy are running means over the epoch's batches;
    validation is a full inference pass at each epoch end.
    """
    n = len(x_train)
    if n == 0:
        raise ValueError("training set must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    adam = Adam(graph.params())
    onehot_all = _onehot(y_train)
    history = TrainHistory()

    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        loss_sum = 0.0
        correct = 0
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            logits = graph.forward_logits(x_train[idx], train=True, rng=rng)
            loss, probs, dlogits = softmax_cross_entropy(logits, onehot_all[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}"
                )
            graph.zero_grads()
            graph.backward_from_logits(dlogits)
            try:
                adam.step(graph.grads())
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(
                    f"epoch {epoch}, batch {batch_index}: {exc}"
                ) from exc
            loss_sum += loss * len(idx)
            correct += int((probs.argmax(axis=1) == y_train[idx]).sum())
        val_loss, val_acc = _eval_pass(graph, x_val, y_val)
        history.train_loss.append(loss_sum / n)
        history.train_accuracy.append(correct / n)
        history.val_loss.append(val_loss)
        history.val_accuracy.append(val_acc)
    return history


def predict(graph: ModelGraph, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inference-mode class probabilities and argmax labels (ties -> clean)."""
    probs = graph.forward(x, train=False)
    return probs, probs.argmax(axis=1)


def model_inputs(kind: ModelKind, features: FeatureSet,
                 fit_indices: np.ndarray) -> tuple[np.ndarray, StandardizeStats | None]:
    """Feature representation for a model kind over the whole set.

    dnn_mean gets raw time-mean vectors. Sequence models get coefficient
    matrices standardized with stats fit on ``fit_indices`` only (the
    training portion), applied to every clip.
    """
    if ModelKind(kind) is ModelKind.DNN_MEAN:
        return features.mean_vectors, None
    stats = fit_standardize(features.matrices[fit_indices])
    return apply_standardize(features.matrices, stats), stats
