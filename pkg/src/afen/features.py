"""The five fixed-shape feature representations and the flattened tree-model vector.

Analysis grid: 2048-point Hann frames hopped by 512 with centered reflect
padding, giving 1 + 132300//512 = 259 frames per standardized clip. Shapes:

    mfcc    (40, 259)
    mel     (128, 259)
    chroma  (12, 259)
    rolloff (1, 259)
    zcr     (1, 259)

The tree-model summary is per-row mean then population std of each matrix,
concatenated in the order above: 80 + 256 + 24 + 2 + 2 = 364 values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import dsp
from .audio_io import SAMPLE_RATE, AudioClip, require_standard
from .errors import ShapeMismatch

N_FFT = 2048
HOP = 512
N_FRAMES = 259
N_BINS = N_FFT // 2 + 1
N_MELS = 128
N_MFCC = 40
N_CHROMA = 12
ROLLOFF_PCT = 0.85
CHROMA_MIN_HZ = 50.0
GBDT_DIM = 364

FEATURE_ORDER = ("mfcc", "mel", "chroma", "rolloff", "zcr")
FEATURE_ROWS = {"mfcc": N_MFCC, "mel": N_MELS, "chroma": N_CHROMA, "rolloff": 1, "zcr": 1}


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def fft_bin_frequencies(n_fft: int = N_FFT, sr: int = SAMPLE_RATE) -> np.ndarray:
    return np.arange(n_fft // 2 + 1) * (sr / n_fft)


def triangle_weights(centers: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Peak-1 triangular responses: row m rises from centers[m] to centers[m+1]
    and falls to centers[m+2], evaluated at ``freqs``."""
    lo = centers[:-2, None]
    mid = centers[1:-1, None]
    hi = centers[2:, None]
    f = freqs[None, :]
    up = (f - lo) / np.maximum(mid - lo, 1e-12)
    down = (hi - f) / np.maximum(hi - mid, 1e-12)
    return np.maximum(0.0, np.minimum(up, down))


@lru_cache(maxsize=None)
def mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = N_FFT,
    sr: int = SAMPLE_RATE,
    f_lo: float = 0.0,
    f_hi: float = SAMPLE_RATE / 2,
) -> np.ndarray:
    """(n_mels, n_fft//2+1) bank of peak-normalized triangular mel filters."""
    mels = np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), n_mels + 2)
    centers = mel_to_hz(mels)
    return triangle_weights(centers, fft_bin_frequencies(n_fft, sr))


@lru_cache(maxsize=None)
def dct_matrix(n_out: int = N_MFCC, n_in: int = N_MELS) -> np.ndarray:
    """First ``n_out`` rows of the orthonormal DCT-II for length ``n_in``."""
    k = np.arange(n_out)[:, None]
    j = np.arange(n_in)[None, :]
    m = np.cos(np.pi * (j + 0.5) * k / n_in) * np.sqrt(2.0 / n_in)
    m[0] *= np.sqrt(0.5)
    return m


@lru_cache(maxsize=None)
def _chroma_map(n_fft: int = N_FFT, sr: int = SAMPLE_RATE) -> np.ndarray:
    """(12, bins) indicator folding each bin above 50 Hz onto its pitch class.

    Class 0 is A (440 Hz); class c collects bins with
    round(12*log2(f/440)) = c (mod 12).
    """
    freqs = fft_bin_frequencies(n_fft, sr)
    classes = np.full(len(freqs), -1, dtype=np.int64)
    audible = freqs > CHROMA_MIN_HZ
    classes[audible] = np.mod(
        np.round(12.0 * np.log2(freqs[audible] / 440.0)).astype(np.int64), 12
    )
    m = np.zeros((N_CHROMA, len(freqs)))
    for c in range(N_CHROMA):
        m[c, classes == c] = 1.0
    return m


def stft_magnitude(clip: AudioClip, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """(1025, 259) magnitude spectrogram of a standardized clip."""
    require_standard(clip)
    return np.abs(dsp.stft(clip.samples, n_fft, hop))


def mel_spectrogram_from_power(power: np.ndarray) -> np.ndarray:
    return np.log1p(mel_filterbank() @ power)


def mel_spectrogram(clip: AudioClip) -> np.ndarray:
    """(128, 259) log1p-compressed mel power spectrogram."""
    mag = stft_magnitude(clip)
    return mel_spectrogram_from_power(mag * mag)


def mfcc_from_power(power: np.ndarray, n_mfcc: int = N_MFCC) -> np.ndarray:
    logmel = np.log(np.maximum(mel_filterbank() @ power, 1e-10))
    return dct_matrix(n_mfcc) @ logmel


def mfcc(clip: AudioClip, n_mfcc: int = N_MFCC) -> np.ndarray:
    """(40, 259) cepstral coefficients: orthonormal DCT-II of the log mel power."""
    mag = stft_magnitude(clip)
    return mfcc_from_power(mag * mag, n_mfcc)


def chroma_from_magnitude(mag: np.ndarray) -> np.ndarray:
    c = _chroma_map() @ mag
    peaks = c.max(axis=0)
    nz = peaks > 0
    c[:, nz] /= peaks[nz]
    return c


def chroma_stft(clip: AudioClip) -> np.ndarray:
    """(12, 259) per-frame max-normalized pitch-class magnitude profile."""
    return chroma_from_magnitude(stft_magnitude(clip))


def rolloff_from_energy(energy: np.ndarray, pct: float = ROLLOFF_PCT) -> np.ndarray:
    cum = np.cumsum(energy, axis=0)
    total = cum[-1]  # same accumulation as cum, so pct=1.0 lands on the top nonzero bin
    meets = cum >= pct * total[None, :]
    idx = np.argmax(meets, axis=0)
    out = idx * (SAMPLE_RATE / N_FFT)
    out[total <= 0.0] = 0.0
    return out[None, :]


def spectral_rolloff(clip: AudioClip, pct: float = ROLLOFF_PCT) -> np.ndarray:
    """(1, 259) lowest frequency holding ``pct`` of each frame's spectral energy."""
    mag = stft_magnitude(clip)
    return rolloff_from_energy(mag * mag, pct)


def zero_crossing_rate(clip: AudioClip, frame: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """(1, 259) fraction of consecutive-sample sign changes per centered frame."""
    require_standard(clip)
    frames = dsp.frame_signal(clip.samples, frame, hop)
    nonneg = frames >= 0.0
    changes = (nonneg[:, 1:] != nonneg[:, :-1]).sum(axis=1)
    return (changes / (frame - 1))[None, :]


@dataclass
class FeatureBundle:
    """The five matrices for one clip plus the 364-dim tree-model vector."""

    mfcc: np.ndarray
    mel: np.ndarray
    chroma: np.ndarray
    rolloff: np.ndarray
    zcr: np.ndarray
    gbdt_vector: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        for name in FEATURE_ORDER:
            mat = np.asarray(getattr(self, name))
            want = (FEATURE_ROWS[name], N_FRAMES)
            if mat.shape != want:
                raise ShapeMismatch(f"{name} must have shape {want}, got {mat.shape}")
            if not np.all(np.isfinite(mat)):
                raise ShapeMismatch(f"{name} contains non-finite values")
            setattr(self, name, mat)
        if self.gbdt_vector is None:
            self.gbdt_vector = gbdt_feature_vector(self)
        self.gbdt_vector = np.asarray(self.gbdt_vector, dtype=np.float64)
        if self.gbdt_vector.shape != (GBDT_DIM,):
            raise ShapeMismatch(f"gbdt_vector must have {GBDT_DIM} entries")

    def matrices(self):
        return [(name, getattr(self, name)) for name in FEATURE_ORDER]


def gbdt_feature_vector(bundle: FeatureBundle) -> np.ndarray:
    """Per-row mean then population std of each matrix, concatenated (364 values)."""
    parts = []
    for name in FEATURE_ORDER:
        mat = np.asarray(getattr(bundle, name), dtype=np.float64)
        parts.append(mat.mean(axis=1))
        parts.append(mat.std(axis=1))
    return np.concatenate(parts)


def extract_bundle(clip: AudioClip) -> FeatureBundle:
    """Compute all five features of a standardized clip from one spectrogram pass."""
    mag = stft_magnitude(clip)
    power = mag * mag
    return FeatureBundle(
        mfcc=mfcc_from_power(power),
        mel=mel_spectrogram_from_power(power),
        chroma=chroma_from_magnitude(mag),
        rolloff=rolloff_from_energy(power),
        zcr=zero_crossing_rate(clip),
    )
