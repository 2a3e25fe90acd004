"""Adam optimization and the epoch loop with best-validation checkpointing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset, ShapeMismatch
from ..rng import RandomStream
from .layers import sparse_xent_loss
from .model import CnnModel


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    dropout: float = 0.3
    seed: int = 0
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise ShapeMismatch("epochs must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ShapeMismatch("dropout must be in [0, 1)")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(
    model: CnnModel,
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> CnnModel:
    """One bias-corrected Adam update from the gradients stored on the model."""
    state.step += 1
    t = state.step
    grads = dict(model.gradients())
    for name, param in model.parameters():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(param)
            state.v[name] = np.zeros_like(param)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        param -= (lr * mhat / (np.sqrt(vhat) + eps)).astype(param.dtype)
    return model


def _batch_slice(data: dict[str, np.ndarray], idx: np.ndarray) -> dict[str, np.ndarray]:
    return {name: arr[idx] for name, arr in data.items()}


def predict_probs(model: CnnModel, data: dict[str, np.ndarray], batch_size: int = 64) -> np.ndarray:
    """Inference-mode probabilities over a whole feature set, batched."""
    n = next(iter(data.values())).shape[0]
    chunks = []
    for lo in range(0, n, batch_size):
        chunks.append(model.forward(_batch_slice(data, np.arange(lo, min(lo + batch_size, n)))))
    return np.concatenate(chunks, axis=0)


def _accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def fit_cnn(
    model: CnnModel,
    train_data: dict[str, np.ndarray],
    train_labels: np.ndarray,
    val_data: dict[str, np.ndarray] | None,
    val_labels: np.ndarray | None,
    config: TrainConfig,
) -> list[dict]:
    """Train with Adam; returns per-epoch history and leaves the model holding
    the parameters with the best validation loss (final ones if no val set)."""
    n = len(train_labels)
    if n == 0:
        raise EmptyDataset("no training samples")
    shuffle_root = RandomStream(config.seed).substream("shuffle")
    model.set_dropout_stream(RandomStream(config.seed).substream("dropout"))
    state = AdamState()
    history: list[dict] = []
    best_val = np.inf
    best_state: dict[str, np.ndarray] | None = None
    has_val = val_labels is not None and len(val_labels) > 0
    for epoch in range(config.epochs):
        order = shuffle_root.substream(epoch).permutation(n)
        losses = []
        hits = 0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            probs = model.forward(_batch_slice(train_data, idx), train=True)
            labels = train_labels[idx]
            losses.append(sparse_xent_loss(probs, labels) * len(idx))
            hits += int(np.sum(np.argmax(probs, axis=1) == labels))
            model.backward(labels)
            adam_step(model, state, lr=config.learning_rate)
        train_loss = float(np.sum(losses) / n)
        train_acc = hits / n
        if has_val:
            val_probs = predict_probs(model, val_data)
            val_loss = sparse_xent_loss(val_probs, val_labels)
            val_acc = _accuracy(val_probs, val_labels)
            if val_loss < best_val:
                best_val = val_loss
                best_state = model.snapshot()
        else:
            val_loss = float("nan")
            val_acc = float("nan")
        history.append(
            {
                "epoch": epoch + 1,
                "train_loss": train_loss,
                "train_acc": train_acc,
                "val_loss": val_loss,
                "val_acc": val_acc,
            }
        )
    if best_state is not None:
        model.load_state(best_state)
    return history
