"""Independent brute-force reference implementations used to verify the
production kernels. Everything here is written the slow, obvious way and
shares no code with the package."""

from __future__ import annotations

import numpy as np


def naive_dft(x: np.ndarray) -> np.ndarray:
    """O(n^2) complex DFT over the last axis."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    j = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(j, j) / n)
    return x @ basis


def naive_dct2_orthonormal(x: np.ndarray, n_out: int) -> np.ndarray:
    """DCT-II of each column by direct cosine summation, orthonormal scaling."""
    n_in, n_cols = x.shape
    out = np.zeros((n_out, n_cols))
    for k in range(n_out):
        scale = np.sqrt(1.0 / n_in) if k == 0 else np.sqrt(2.0 / n_in)
        for c in range(n_cols):
            acc = 0.0
            for j in range(n_in):
                acc += x[j, c] * np.cos(np.pi * (j + 0.5) * k / n_in)
            out[k, c] = scale * acc
    return out


def naive_conv2d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray | None,
                      stride: tuple[int, int]) -> np.ndarray:
    """Six-loop same-padded cross-correlation."""
    kh, kw, cin, cout = w.shape
    sh, sw = stride
    n, h, ww, _ = x.shape
    oh = -(-h // sh)
    ow = -(-ww // sw)
    tot_h = max((oh - 1) * sh + kh - h, 0)
    tot_w = max((ow - 1) * sw + kw - ww, 0)
    xp = np.pad(x, ((0, 0), (tot_h // 2, tot_h - tot_h // 2),
                    (tot_w // 2, tot_w - tot_w // 2), (0, 0)))
    out = np.zeros((n, oh, ow, cout), dtype=np.float64)
    for ni in range(n):
        for oi in range(oh):
            for oj in range(ow):
                for ki in range(kh):
                    for kj in range(kw):
                        for ci in range(cin):
                            out[ni, oi, oj, :] += xp[ni, oi * sh + ki, oj * sw + kj, ci] * w[ki, kj, ci, :]
    if b is not None:
        out += b
    return out


def brute_force_best_split(x, g, h, reg_lambda, gamma, min_child_weight):
    """Score every (feature, midpoint) candidate; first strict maximum wins
    in (feature, threshold) order."""
    n, d = x.shape
    best = None
    for f in range(d):
        vals = np.unique(x[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = (a + b) / 2.0
            left = x[:, f] < thr
            gl, hl = g[left].sum(), h[left].sum()
            gr, hr = g[~left].sum(), h[~left].sum()
            if hl < min_child_weight or hr < min_child_weight:
                continue
            gain = 0.5 * (
                gl * gl / (hl + reg_lambda)
                + gr * gr / (hr + reg_lambda)
                - (gl + gr) ** 2 / (hl + hr + reg_lambda)
            ) - gamma
            if gain > 0.0 and (best is None or gain > best[2] + 1e-15):
                best = (f, thr, gain)
    return best


def pair_count_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """AUC by exhaustive positive-negative pair counting (ties count half)."""
    pos = scores[positive]
    neg = scores[~positive]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def naive_report(probs: np.ndarray, labels: np.ndarray) -> dict:
    """Loop-based recomputation of every report metric."""
    n, k = probs.shape
    preds = []
    for i in range(n):
        best = 0
        for c in range(1, k):
            if probs[i, c] > probs[i, best]:
                best = c
        preds.append(best)
    confusion = [[0] * k for _ in range(k)]
    for t, p in zip(labels, preds):
        confusion[t][p] += 1
    correct = sum(confusion[c][c] for c in range(k))
    accuracy = correct / n
    precision = []
    recall = []
    for c in range(k):
        col = sum(confusion[t][c] for t in range(k))
        row = sum(confusion[c])
        tp = confusion[c][c]
        precision.append(tp / col if col else 0.0)
        recall.append(tp / row if row else None)
    loss = 0.0
    for i in range(n):
        loss -= np.log(max(probs[i, labels[i]], 1e-15))
    loss /= n
    aucs = []
    for c in range(k):
        positive = np.asarray(labels) == c
        if 0 < positive.sum() < n:
            aucs.append(pair_count_auc(probs[:, c], positive))
    return {
        "accuracy": accuracy,
        "log_loss": loss,
        "macro_auc": float(np.mean(aucs)),
        "precision": precision,
        "recall": recall,
        "confusion": confusion,
    }


def two_pass_mean_std(row: np.ndarray) -> tuple[float, float]:
    m = sum(row) / len(row)
    var = sum((v - m) ** 2 for v in row) / len(row)
    return m, float(np.sqrt(var))


def dominant_frequency(x: np.ndarray, sr: int) -> float:
    """FFT-argmax frequency estimate (uses numpy's FFT: oracle side only)."""
    spec = np.abs(np.fft.rfft(x))
    return float(np.argmax(spec) * sr / len(x))


def measured_snr_db(clean: np.ndarray, noisy: np.ndarray) -> float:
    p_sig = float(np.mean(clean ** 2))
    p_noise = float(np.mean((noisy - clean) ** 2))
    return 10.0 * np.log10(p_sig / p_noise)


def rms_db(x: np.ndarray) -> float:
    return 20.0 * np.log10(float(np.sqrt(np.mean(x ** 2))))
