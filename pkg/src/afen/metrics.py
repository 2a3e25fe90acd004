"""Evaluation suite: multiclass log loss, confusion counts, per-class
precision/recall, one-vs-rest macro AUC, and the assembled report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabels, LabelOutOfRange, ShapeMismatch

DIAGNOSIS_CLASSES = (
    "Asthma",
    "Bronchiectasis",
    "Bronchiolitis",
    "COPD",
    "Healthy",
    "LRTI",
    "Pneumonia",
    "URTI",
)


def _check_labels(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    return labels


def mlogloss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-probability of the true class (floor 1e-15)."""
    probs = np.asarray(probs)
    labels = _check_labels(labels, probs.shape[1])
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-15))))


def confusion_matrix(pred_labels: np.ndarray, true_labels: np.ndarray, k: int = 8) -> np.ndarray:
    """k x k counts; cell (t, p) holds samples with true class t predicted p."""
    pred = _check_labels(pred_labels, k)
    true = _check_labels(true_labels, k)
    if pred.shape != true.shape:
        raise ShapeMismatch("prediction/label length mismatch")
    m = np.zeros((k, k), dtype=np.int64)
    np.add.at(m, (true, pred), 1)
    return m


def precision_recall(confusion: np.ndarray) -> list[tuple[float, float | None]]:
    """Per-class (precision, recall). Precision is 0 when a class is never
    predicted; recall is None when a class has no support."""
    confusion = np.asarray(confusion)
    k = confusion.shape[0]
    out = []
    for c in range(k):
        tp = confusion[c, c]
        predicted = confusion[:, c].sum()
        support = confusion[c, :].sum()
        precision = float(tp / predicted) if predicted > 0 else 0.0
        recall = float(tp / support) if support > 0 else None
        out.append((precision, recall))
    return out


def _binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Mann-Whitney rank AUC; ties contribute one half via midranks."""
    n = len(scores)
    uniq, inv = np.unique(scores, return_inverse=True)
    counts = np.bincount(inv)
    cum = np.cumsum(counts)
    midrank = cum - (counts - 1) / 2.0
    ranks = midrank[inv]
    n_pos = int(positive.sum())
    n_neg = n - n_pos
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_auc_ovr(probs: np.ndarray, labels: np.ndarray) -> float:
    """Macro average of one-vs-rest AUCs over classes with both positives and
    negatives present."""
    probs = np.asarray(probs)
    labels = _check_labels(labels, probs.shape[1])
    if len(np.unique(labels)) < 2:
        raise DegenerateLabels("need at least two classes present for AUC")
    aucs = []
    for c in range(probs.shape[1]):
        positive = labels == c
        n_pos = int(positive.sum())
        if n_pos == 0 or n_pos == len(labels):
            continue
        aucs.append(_binary_auc(probs[:, c], positive))
    return float(np.mean(aucs))


@dataclass
class EvalReport:
    """All Table-style metrics for one model on one evaluation set."""

    model: str
    accuracy: float
    log_loss: float
    macro_auc: float
    precision: list[float]
    recall: list[float | None]
    support: list[int]
    confusion: np.ndarray
    class_names: tuple[str, ...] = DIAGNOSIS_CLASSES
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = {
            "model": self.model,
            "accuracy": self.accuracy,
            "log_loss": self.log_loss,
            "macro_auc": self.macro_auc,
            "classes": [
                {
                    "name": self.class_names[c],
                    "precision": self.precision[c],
                    "recall": self.recall[c],
                    "support": self.support[c],
                }
                for c in range(len(self.class_names))
            ],
            "confusion": self.confusion.tolist(),
        }
        if self.metadata:
            d["metadata"] = self.metadata
        return d


def evaluate(
    probs: np.ndarray,
    labels: np.ndarray,
    model_name: str = "model",
    class_names: tuple[str, ...] = DIAGNOSIS_CLASSES,
    metadata: dict | None = None,
) -> EvalReport:
    """Assemble the report; predictions are argmax with lowest-index tie-break."""
    probs = np.asarray(probs)
    labels = _check_labels(labels, probs.shape[1])
    preds = np.argmax(probs, axis=1)
    confusion = confusion_matrix(preds, labels, probs.shape[1])
    support = confusion.sum(axis=1)
    accuracy = float(np.trace(confusion) / max(len(labels), 1))
    pr = precision_recall(confusion)
    return EvalReport(
        model=model_name,
        accuracy=accuracy,
        log_loss=mlogloss(probs, labels),
        macro_auc=macro_auc_ovr(probs, labels),
        precision=[p for p, _ in pr],
        recall=[r for _, r in pr],
        support=[int(s) for s in support],
        confusion=confusion,
        class_names=class_names,
        metadata=metadata or {},
    )
