"""Soft-voting fusion of the two classifiers' probability outputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, WeightOutOfRange
from .metrics import mlogloss

WEIGHT_GRID = np.round(np.arange(0.0, 1.0001, 0.05), 2)


@dataclass
class EnsembleSpec:
    """Mixing weight for the CNN; the tree model gets the complement."""

    weight_cnn: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.weight_cnn <= 1.0:
            raise WeightOutOfRange(f"weight_cnn must be in [0, 1], got {self.weight_cnn}")

    @property
    def weight_gbdt(self) -> float:
        return 1.0 - self.weight_cnn


def _check_stochastic(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D")
    if not np.allclose(p.sum(axis=1), 1.0, atol=1e-5) or p.min() < -1e-9:
        raise ShapeMismatch(f"{name} rows must be probability vectors")
    return p


def soft_vote(p_cnn: np.ndarray, p_gbdt: np.ndarray, spec: EnsembleSpec) -> np.ndarray:
    """Elementwise w*p_cnn + (1-w)*p_gbdt; rows stay stochastic."""
    a = _check_stochastic(p_cnn, "p_cnn")
    b = _check_stochastic(p_gbdt, "p_gbdt")
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape mismatch {a.shape} vs {b.shape}")
    return spec.weight_cnn * a + spec.weight_gbdt * b


def calibrate_weight(
    p_cnn: np.ndarray,
    p_gbdt: np.ndarray,
    labels: np.ndarray,
    grid: np.ndarray = WEIGHT_GRID,
) -> float:
    """Grid-search the mixing weight minimizing validation log loss;
    the first minimum in grid order wins, so the result is deterministic."""
    best_w = float(grid[0])
    best_loss = np.inf
    for w in grid:
        loss = mlogloss(soft_vote(p_cnn, p_gbdt, EnsembleSpec(float(w))), labels)
        if loss < best_loss:
            best_loss = loss
            best_w = float(w)
    return best_w
