"""Spectral and rate-conversion primitives shared by features and augment.

The FFT is an iterative radix-2 Cooley-Tukey over the last axis, written
against plain numpy array ops so whole frame stacks transform at once.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ShapeMismatch


@lru_cache(maxsize=None)
def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(n: int) -> np.ndarray:
    # exp(-2i*pi*k/n) for k < n/2; stage m strides this table by n//m
    k = np.arange(n // 2)
    return np.exp(-2j * np.pi * k / n)


def fft(x: np.ndarray) -> np.ndarray:
    """DFT over the last axis; length must be a power of two."""
    x = np.asarray(x)
    n = x.shape[-1]
    if n == 0 or n & (n - 1):
        raise ShapeMismatch(f"fft length must be a power of two, got {n}")
    out_dtype = np.complex64 if x.dtype in (np.float32, np.complex64) else np.complex128
    y = np.ascontiguousarray(x[..., _bit_reverse_indices(n)], dtype=out_dtype)
    if n == 1:
        return y
    flat = y.reshape(-1, n)
    tw_all = _twiddles(n).astype(out_dtype)
    m = 2
    while m <= n:
        half = m // 2
        tw = tw_all[:: n // m][:half]
        blocks = flat.reshape(-1, n // m, m)
        odd = blocks[..., half:] * tw
        even = blocks[..., :half].copy()
        blocks[..., :half] = even + odd
        blocks[..., half:] = even - odd
        m *= 2
    return flat.reshape(x.shape)


def ifft(x: np.ndarray) -> np.ndarray:
    """Inverse DFT over the last axis (power-of-two length)."""
    x = np.asarray(x)
    return np.conj(fft(np.conj(x))) / x.shape[-1]


def rfft(x: np.ndarray) -> np.ndarray:
    """DFT of real input; returns the n//2 + 1 non-negative-frequency bins."""
    x = np.asarray(x)
    return fft(x)[..., : x.shape[-1] // 2 + 1]


def irfft(spec: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`rfft` for an even power-of-two length ``n``."""
    spec = np.asarray(spec)
    if spec.shape[-1] != n // 2 + 1:
        raise ShapeMismatch(f"expected {n // 2 + 1} bins, got {spec.shape[-1]}")
    tail = np.conj(spec[..., -2:0:-1])
    return ifft(np.concatenate([spec, tail], axis=-1)).real


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window (sums to a constant under 4x overlap-add)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_signal(x: np.ndarray, frame: int, hop: int, pad_mode: str = "reflect") -> np.ndarray:
    """Centered frames of a 1-D signal, shape (1 + len(x)//hop, frame).

    The signal is padded by frame//2 on both sides so frame ``t`` is centered
    on sample ``t*hop``.
    """
    x = np.asarray(x)
    if x.ndim != 1:
        raise ShapeMismatch("frame_signal expects a 1-D signal")
    half = frame // 2
    if pad_mode == "reflect" and len(x) <= half:
        pad_mode = "constant"
    n_frames = 1 + len(x) // hop
    padded = np.pad(x, half, mode=pad_mode)
    need = (n_frames - 1) * hop + frame
    if len(padded) < need:
        padded = np.pad(padded, (0, need - len(padded)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, frame)[::hop]
    return windows[:n_frames]


def stft(x: np.ndarray, n_fft: int = 2048, hop: int = 512) -> np.ndarray:
    """Complex STFT with centered Hann-windowed frames, shape (n_fft//2+1, frames)."""
    frames = frame_signal(x, n_fft, hop) * hann_window(n_fft)
    return rfft(frames).T


def istft(spec: np.ndarray, n_fft: int = 2048, hop: int = 512) -> np.ndarray:
    """Overlap-add inverse of :func:`stft`; returns hop*(frames-1) samples."""
    spec = np.asarray(spec)
    n_frames = spec.shape[1]
    win = hann_window(n_fft)
    frames = irfft(spec.T, n_fft) * win
    total = n_fft + hop * (n_frames - 1)
    y = np.zeros(total)
    wsum = np.zeros(total)
    wsq = win * win
    for t in range(n_frames):
        start = t * hop
        y[start : start + n_fft] += frames[t]
        wsum[start : start + n_fft] += wsq
    good = wsum > 1e-10
    y[good] /= wsum[good]
    half = n_fft // 2
    return y[half : total - half]


def resample_to_length(x: np.ndarray, n_out: int, taps: int = 32) -> np.ndarray:
    """Windowed-sinc resample of a 1-D signal to exactly ``n_out`` samples.

    Output sample i is taken at input position i*len(x)/n_out, interpolated
    with a Hann-windowed sinc whose cutoff is lowered when decimating so the
    kernel also anti-aliases.
    """
    x = np.asarray(x, dtype=np.float64)
    n_in = len(x)
    if n_in == 0 or n_out <= 0:
        raise ShapeMismatch("resample needs nonempty input and positive output length")
    if n_out == n_in:
        return x.copy()
    step = n_in / n_out
    fc = min(1.0, n_out / n_in) * 0.945
    half = int(np.ceil(taps / fc))
    padded = np.pad(x, half + 1)
    offsets = np.arange(-half + 1, half + 1)
    out = np.empty(n_out)
    chunk = max(1, int(4e6) // (2 * half))
    for lo in range(0, n_out, chunk):
        hi = min(lo + chunk, n_out)
        t = np.arange(lo, hi) * step
        base = np.floor(t).astype(np.int64)
        # distance from each tap to the exact sample position
        d = t[:, None] - (base[:, None] + offsets[None, :])
        w = fc * np.sinc(fc * d) * (0.5 + 0.5 * np.cos(np.pi * d / half))
        idx = base[:, None] + offsets[None, :] + half + 1
        out[lo:hi] = np.sum(padded[idx] * w, axis=1)
    return out


def resample(x: np.ndarray, sr_in: int, sr_out: int) -> np.ndarray:
    """Rate conversion by windowed-sinc interpolation."""
    if sr_in == sr_out:
        return np.asarray(x, dtype=np.float64).copy()
    n_out = int(round(len(x) * sr_out / sr_in))
    return resample_to_length(x, max(n_out, 1))
