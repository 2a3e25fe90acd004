"""Network layers with explicit forward/backward passes.

Tensors are NHWC. Convolutions use TensorFlow-style "same" padding, so the
spatial output is ceil(input/stride). Each layer caches what its backward
pass needs; training is single-writer, inference on a frozen model is
reentrant because infer-mode forwards do not touch the caches.
"""

from __future__ import annotations

import numpy as np

from ..errors import LabelOutOfRange, ShapeMismatch
from ..rng import RandomStream


def same_pad(size: int, kernel: int, stride: int) -> tuple[int, int, int]:
    """(out_size, pad_before, pad_after) for same-padding."""
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


def _im2col(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int, oh: int, ow: int) -> np.ndarray:
    """(n, H, W, c) padded input -> (n*oh*ow, kh*kw*c) patch matrix."""
    n, _, _, c = xp.shape
    view = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    view = view[:, ::sh, ::sw][:, :oh, :ow]  # (n, oh, ow, c, kh, kw)
    cols = np.ascontiguousarray(np.moveaxis(view, 3, 5))  # (n, oh, ow, kh, kw, c)
    return cols.reshape(n * oh * ow, kh * kw * c)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: tuple[int, int]):
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeMismatch("conv2d expects a 4-D input and 4-D weights")
    if x.shape[3] != w.shape[2]:
        raise ShapeMismatch(f"input channels {x.shape[3]} != weight channels {w.shape[2]}")
    kh, kw, cin, cout = w.shape
    sh, sw = stride
    n, h, w_, _ = x.shape
    oh, pt, pb = same_pad(h, kh, sh)
    ow, pl, pr = same_pad(w_, kw, sw)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    cols = _im2col(xp, kh, kw, sh, sw, oh, ow)
    out = (cols @ w.reshape(kh * kw * cin, cout)).reshape(n, oh, ow, cout)
    if b is not None:
        out += b
    return out, (cols, xp.shape, (n, h, w_), (pt, pl), (oh, ow))


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: tuple[int, int]) -> np.ndarray:
    """Same-padded cross-correlation of NHWC input with (kh, kw, cin, cout) weights.

    One GEMM per kernel offset over strided slices of the padded input, which
    keeps everything in BLAS without an im2col buffer.
    """
    out, _ = _conv_forward(x, w, b, stride)
    return out


class Conv2D:
    """Convolution with bias; He-uniform initialized."""

    def __init__(self, in_ch: int, out_ch: int, kernel: tuple[int, int],
                 stride: tuple[int, int], stream: RandomStream, dtype=np.float32):
        kh, kw = kernel
        fan_in = kh * kw * in_ch
        limit = np.sqrt(6.0 / fan_in)
        self.w = stream.uniform(kh * kw * in_ch * out_ch, -limit, limit).reshape(
            kh, kw, in_ch, out_ch).astype(dtype)
        self.b = np.zeros(out_ch, dtype=dtype)
        self.stride = stride
        self.dw = None
        self.db = None
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        out, cache = _conv_forward(x, self.w, self.b, self.stride)
        if train:
            self._cache = cache
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        cols, xp_shape, (n, h, w_), (pt, pl), (oh, ow) = self._cache
        kh, kw, cin, cout = self.w.shape
        sh, sw = self.stride
        dflat = dout.reshape(-1, cout)
        self.dw = (cols.T @ dflat).reshape(kh, kw, cin, cout)
        self.db = dout.sum(axis=(0, 1, 2))
        dcols = (dflat @ self.w.reshape(kh * kw * cin, cout).T).reshape(n, oh, ow, kh, kw, cin)
        dxp = np.zeros(xp_shape, dtype=dout.dtype)
        for ki in range(kh):
            for kj in range(kw):
                dxp[:, ki : ki + sh * oh : sh, kj : kj + sw * ow : sw, :] += dcols[:, :, :, ki, kj, :]
        return dxp[:, pt : pt + h, pl : pl + w_, :]

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def grads(self):
        return [("w", self.dw), ("b", self.db)]


class BatchNorm:
    """Per-channel batch normalization for NHWC tensors (eps 1e-5, momentum 0.9)."""

    def __init__(self, channels: int, dtype=np.float32, momentum: float = 0.9, eps: float = 1e-5):
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self.dgamma = None
        self.dbeta = None
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        axes = (0, 1, 2)
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = (self.momentum * self.running_mean
                                 + (1.0 - self.momentum) * mean).astype(x.dtype)
            self.running_var = (self.momentum * self.running_var
                                + (1.0 - self.momentum) * var).astype(x.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        if train:
            self._cache = (xhat, inv.astype(x.dtype))
        return self.gamma * xhat + self.beta

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xhat, inv = self._cache
        axes = (0, 1, 2)
        m = dout.size // dout.shape[-1]
        self.dgamma = (dout * xhat).sum(axis=axes)
        self.dbeta = dout.sum(axis=axes)
        return (self.gamma * inv / m) * (
            m * dout - self.dbeta - xhat * self.dgamma
        )

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def grads(self):
        return [("gamma", self.dgamma), ("beta", self.dbeta)]

    def buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        out = np.maximum(x, 0.0)
        if train:
            self._mask = x > 0.0
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._mask

    def params(self):
        return []

    def grads(self):
        return []


def _effective_pool(size: int, pool: int) -> int:
    # a dimension smaller than the pool keeps extent 1 (height-1 branches)
    return pool if size >= pool else 1


def max_pool2d(x: np.ndarray, pool: tuple[int, int]) -> np.ndarray:
    """Ceil-mode max pooling with stride = pool; returns values only."""
    out, _ = _max_pool_forward(x, pool)
    return out


def _max_pool_forward(x: np.ndarray, pool: tuple[int, int]):
    n, h, w, c = x.shape
    ph = _effective_pool(h, pool[0])
    pw = _effective_pool(w, pool[1])
    oh = -(-h // ph)
    ow = -(-w // pw)
    xp = np.pad(x, ((0, 0), (0, oh * ph - h), (0, ow * pw - w), (0, 0)),
                constant_values=-np.inf)
    windows = xp.reshape(n, oh, ph, ow, pw, c)
    windows = np.moveaxis(windows, 2, 3).reshape(n, oh, ow, ph * pw, c)
    idx = np.argmax(windows, axis=3)  # first max in row-major window scan
    out = np.take_along_axis(windows, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return out, (idx, (ph, pw), (h, w))


class MaxPool2D:
    def __init__(self, pool: tuple[int, int]):
        self.pool = pool
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        out, cache = _max_pool_forward(x, self.pool)
        if train:
            self._cache = cache
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        idx, (ph, pw), (h, w) = self._cache
        n, oh, ow, c = dout.shape
        dwin = np.zeros((n, oh, ow, ph * pw, c), dtype=dout.dtype)
        np.put_along_axis(dwin, idx[:, :, :, None, :], dout[:, :, :, None, :], axis=3)
        dwin = np.moveaxis(dwin.reshape(n, oh, ow, ph, pw, c), 3, 2)
        dxp = dwin.reshape(n, oh * ph, ow * pw, c)
        return dxp[:, :h, :w, :]

    def params(self):
        return []

    def grads(self):
        return []


class SelfAttention:
    """Single-head scaled dot-product attention over flattened spatial positions.

    Output is a residual x + gamma * attend(x); gamma starts at 0 so the layer
    begins as the identity and learns how much attention to mix in.
    """

    def __init__(self, channels: int, stream: RandomStream, dtype=np.float32):
        limit = np.sqrt(6.0 / channels)
        def proj():
            return stream.uniform(channels * channels, -limit, limit).reshape(
                channels, channels).astype(dtype)
        self.wq = proj()
        self.wk = proj()
        self.wv = proj()
        self.gamma = np.zeros(1, dtype=dtype)
        self.dwq = self.dwk = self.dwv = self.dgamma = None
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        n, h, w, c = x.shape
        xs = x.reshape(n, h * w, c)
        q = xs @ self.wq
        k = xs @ self.wk
        v = xs @ self.wv
        scores = q @ np.swapaxes(k, 1, 2) / np.sqrt(np.asarray(c, dtype=x.dtype))
        scores -= scores.max(axis=2, keepdims=True)
        attn = np.exp(scores)
        attn /= attn.sum(axis=2, keepdims=True)
        ctx = attn @ v
        if train:
            self._cache = (xs, q, k, v, attn, ctx, (n, h, w, c))
        return (xs + self.gamma * ctx).reshape(n, h, w, c)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xs, q, k, v, attn, ctx, (n, h, w, c) = self._cache
        dy = dout.reshape(n, h * w, c)
        self.dgamma = np.array([np.sum(dy * ctx)], dtype=dout.dtype)
        dctx = self.gamma * dy
        dattn = dctx @ np.swapaxes(v, 1, 2)
        dv = np.swapaxes(attn, 1, 2) @ dctx
        # softmax jacobian applied row-wise
        dscores = attn * (dattn - np.sum(dattn * attn, axis=2, keepdims=True))
        scale = 1.0 / np.sqrt(np.asarray(c, dtype=dout.dtype))
        dq = dscores @ k * scale
        dk = np.swapaxes(dscores, 1, 2) @ q * scale
        flat = xs.reshape(-1, c)
        self.dwq = flat.T @ dq.reshape(-1, c)
        self.dwk = flat.T @ dk.reshape(-1, c)
        self.dwv = flat.T @ dv.reshape(-1, c)
        dx = dy + dq @ self.wq.T + dk @ self.wk.T + dv @ self.wv.T
        return dx.reshape(n, h, w, c)

    def params(self):
        return [("wq", self.wq), ("wk", self.wk), ("wv", self.wv), ("gamma", self.gamma)]

    def grads(self):
        return [("wq", self.dwq), ("wk", self.dwk), ("wv", self.dwv), ("gamma", self.dgamma)]


class GlobalMaxPool:
    """Max over all spatial positions, (n, h, w, c) -> (n, c)."""

    def __init__(self):
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        n, h, w, c = x.shape
        flat = x.reshape(n, h * w, c)
        idx = np.argmax(flat, axis=1)
        if train:
            self._cache = (idx, (n, h, w, c))
        return np.take_along_axis(flat, idx[:, None, :], axis=1)[:, 0, :]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        idx, (n, h, w, c) = self._cache
        dflat = np.zeros((n, h * w, c), dtype=dout.dtype)
        np.put_along_axis(dflat, idx[:, None, :], dout[:, None, :], axis=1)
        return dflat.reshape(n, h, w, c)

    def params(self):
        return []

    def grads(self):
        return []


class Dense:
    def __init__(self, in_dim: int, out_dim: int, stream: RandomStream, dtype=np.float32):
        limit = np.sqrt(6.0 / in_dim)
        self.w = stream.uniform(in_dim * out_dim, -limit, limit).reshape(in_dim, out_dim).astype(dtype)
        self.b = np.zeros(out_dim, dtype=dtype)
        self.dw = None
        self.db = None
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if train:
            self._cache = x
        return x @ self.w + self.b

    def backward(self, dout: np.ndarray) -> np.ndarray:
        x = self._cache
        self.dw = x.T @ dout
        self.db = dout.sum(axis=0)
        return dout @ self.w.T

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def grads(self):
        return [("w", self.dw), ("b", self.db)]


class Dropout:
    """Inverted dropout; active only in train mode, mask drawn from the model stream."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ShapeMismatch(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.stream: RandomStream | None = None
        self._mask = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if not train or self.rate == 0.0:
            return x
        keep = self.stream.uniform(x.size).reshape(x.shape) >= self.rate
        self._mask = keep.astype(x.dtype) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return dout
        return dout * self._mask

    def params(self):
        return []

    def grads(self):
        return []


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-stochastic softmax, stabilized by row-max subtraction."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sparse_xent_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-probability of the true class (probabilities floored at 1e-12)."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise LabelOutOfRange(
            f"labels must lie in [0, {probs.shape[1]}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-12))))
