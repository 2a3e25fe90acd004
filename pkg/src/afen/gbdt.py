"""Second-order gradient-boosted trees with a multiclass softmax objective.

Each round grows one regression tree per class on the softmax
gradient/hessian; splits are exact greedy over every feature threshold with
the usual second-order gain

    1/2 [ G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda) ] - gamma

and leaf weights -lr * G/(H+lambda). Ties break to the lowest feature index,
then the lowest threshold, so forests are bit-stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, LabelOutOfRange, NumericError, ShapeMismatch
from .metrics import mlogloss


@dataclass
class BoostConfig:
    n_rounds: int = 400
    learning_rate: float = 0.3
    max_depth: int = 6
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    class_count: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ShapeMismatch("n_rounds must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ShapeMismatch("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise ShapeMismatch("max_depth must be >= 1")


@dataclass
class TreeNode:
    """Split node or leaf; leaves carry the learning-rate-scaled weight."""

    is_leaf: bool
    weight: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    default_left: bool = True
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0])
        self._predict_into(x, np.arange(x.shape[0]), out)
        return out

    def _predict_into(self, x: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
        if self.is_leaf:
            out[idx] = self.weight
            return
        col = x[idx, self.feature]
        nan = np.isnan(col)
        goes_left = col < self.threshold
        goes_left[nan] = self.default_left
        self.left._predict_into(x, idx[goes_left], out)
        self.right._predict_into(x, idx[~goes_left], out)

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


@dataclass
class GbdtModel:
    config: BoostConfig
    base_score: np.ndarray
    trees: list[list[TreeNode]] = field(default_factory=list)  # rounds x classes

    @property
    def rounds_completed(self) -> int:
        return len(self.trees)


def softmax_rows(margins: np.ndarray) -> np.ndarray:
    """Row-stochastic softmax in float64, stabilized by row-max subtraction."""
    z = np.asarray(margins, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def grad_hess(probs: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample softmax gradient p - onehot and diagonal hessian p(1-p)."""
    labels = np.asarray(labels)
    if len(labels) and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise LabelOutOfRange(f"labels outside [0, {probs.shape[1]})")
    g = probs.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    h = probs * (1.0 - probs)
    return g, h


def presort_columns(x: np.ndarray) -> np.ndarray:
    """Row indices sorting each feature column ascending (stable)."""
    return np.argsort(x, axis=0, kind="stable")


def _best_split_from_orders(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    orders: np.ndarray,
    config: BoostConfig,
) -> tuple[int, float, float] | None:
    n, d = orders.shape
    if n < 2:
        return None
    cols = np.arange(d)[None, :]
    xs = x[orders, cols]
    gl = np.cumsum(g[orders], axis=0)[:-1]
    hl = np.cumsum(h[orders], axis=0)[:-1]
    g_total = g[orders[:, 0]].sum()
    h_total = h[orders[:, 0]].sum()
    gr = g_total - gl
    hr = h_total - hl
    lam = config.reg_lambda
    parent = g_total * g_total / (h_total + lam)
    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - config.gamma
    valid = (
        (xs[1:] > xs[:-1])
        & (hl >= config.min_child_weight)
        & (hr >= config.min_child_weight)
    )
    gain[~valid] = -np.inf
    # feature-major argmax: first max = lowest feature, then lowest threshold
    flat = gain.T.reshape(-1)
    best = int(np.argmax(flat))
    best_gain = flat[best]
    if not np.isfinite(best_gain) or best_gain <= 0.0:
        return None
    feat, pos = divmod(best, n - 1)
    threshold = 0.5 * (xs[pos, feat] + xs[pos + 1, feat])
    return feat, float(threshold), float(best_gain)


def best_split(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    config: BoostConfig,
) -> tuple[int, float, float] | None:
    """Exact greedy search over all (feature, midpoint) splits of the node.

    Returns (feature, threshold, gain) or None when no split has positive
    gain or a child cannot satisfy min_child_weight.
    """
    if x.shape[0] < 2:
        return None
    return _best_split_from_orders(x, g, h, presort_columns(x), config)


def grow_tree(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    config: BoostConfig,
    orders: np.ndarray | None = None,
) -> TreeNode:
    """One regression tree on gradient/hessian targets, depth-limited.

    ``orders`` is the presorted column index table; children inherit their
    partitions of it, so no node after the root ever re-sorts.
    """
    if orders is None:
        orders = presort_columns(x)
    lam = config.reg_lambda
    goes_left_lookup = np.zeros(x.shape[0], dtype=bool)

    def leaf(idx: np.ndarray) -> TreeNode:
        weight = -config.learning_rate * g[idx].sum() / (h[idx].sum() + lam)
        return TreeNode(is_leaf=True, weight=float(weight))

    def build(node_orders: np.ndarray, depth: int) -> TreeNode:
        idx = node_orders[:, 0]
        if depth >= config.max_depth or len(idx) < 2:
            return leaf(idx)
        found = _best_split_from_orders(x, g, h, node_orders, config)
        if found is None:
            return leaf(idx)
        feat, threshold, _ = found
        left_mask = x[idx, feat] < threshold
        goes_left_lookup[idx] = left_mask
        member = goes_left_lookup[node_orders]
        n_left = int(left_mask.sum())
        d = node_orders.shape[1]
        left_orders = node_orders.T[member.T].reshape(d, n_left).T
        right_orders = node_orders.T[~member.T].reshape(d, len(idx) - n_left).T
        hl = h[idx[left_mask]].sum()
        hr = h[idx[~left_mask]].sum()
        return TreeNode(
            is_leaf=False,
            feature=feat,
            threshold=threshold,
            default_left=bool(hl >= hr),
            left=build(left_orders, depth + 1),
            right=build(right_orders, depth + 1),
        )

    return build(orders, 0)


def fit_gbdt(
    features: np.ndarray,
    labels: np.ndarray,
    config: BoostConfig,
) -> tuple[GbdtModel, list[dict]]:
    """Boost ``n_rounds`` rounds of one-tree-per-class; returns the model and
    the per-round training log-loss history (checked non-increasing)."""
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    n, _ = x.shape
    k = config.class_count
    counts = np.bincount(labels, minlength=k)
    if len(labels) != n:
        raise ShapeMismatch("features/labels length mismatch")
    if np.any(counts == 0):
        missing = [int(c) for c in np.flatnonzero(counts == 0)]
        raise DegenerateData(f"classes with no training sample: {missing}")
    base = np.log(counts / n)
    model = GbdtModel(config=config, base_score=base)
    margins = np.tile(base, (n, 1))
    root_orders = presort_columns(x)
    history: list[dict] = []
    prev_loss = np.inf
    for rnd in range(config.n_rounds):
        probs = softmax_rows(margins)
        g, h = grad_hess(probs, labels)
        round_trees = []
        for c in range(k):
            tree = grow_tree(x, g[:, c], h[:, c], config, orders=root_orders)
            margins[:, c] += tree.predict(x)
            round_trees.append(tree)
        model.trees.append(round_trees)
        loss = mlogloss(softmax_rows(margins), labels)
        if config.gamma == 0.0 and loss > prev_loss + 1e-12:
            raise NumericError(
                f"training log-loss rose from {prev_loss:.6g} to {loss:.6g} at round {rnd + 1}"
            )
        prev_loss = loss
        history.append({"round": rnd + 1, "train_mlogloss": loss})
    return model, history


def predict_margins(model: GbdtModel, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch("features must be 2-D")
    margins = np.tile(model.base_score, (x.shape[0], 1))
    for round_trees in model.trees:
        for c, tree in enumerate(round_trees):
            margins[:, c] += tree.predict(x)
    return margins


def predict_gbdt(model: GbdtModel, features: np.ndarray) -> np.ndarray:
    """Class probabilities: softmax of base score plus summed tree outputs."""
    return softmax_rows(predict_margins(model, features))
