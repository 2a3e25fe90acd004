"""Waveform augmentations: additive Gaussian noise at a target SNR, a
Butterworth-characteristic bandpass, circular time shift, and a
phase-vocoder pitch shift.

All four preserve the standardized length/rate and are deterministic given
the augmentation seed; per-clip substreams make results independent of
corpus order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import dsp
from .audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, require_standard
from .errors import InvalidBand, ShapeMismatch, SilentClip
from .rng import RandomStream, hash_key


@dataclass
class AugmentSpec:
    """Parameter ranges for the four augmentations.

    ``shift_fraction`` and ``pitch_semitones`` bound symmetric uniform draws;
    the noise and band settings are applied as given.
    """

    snr_db: float = 20.0
    band_lo_hz: float = 100.0
    band_hi_hz: float = 2000.0
    band_order: int = 4
    shift_fraction: float = 0.2
    pitch_semitones: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.band_lo_hz < self.band_hi_hz < SAMPLE_RATE / 2:
            raise InvalidBand(
                f"need 0 < lo < hi < {SAMPLE_RATE / 2}, got [{self.band_lo_hz}, {self.band_hi_hz}]"
            )
        if abs(self.shift_fraction) > 0.5:
            raise InvalidBand("|shift_fraction| must be <= 0.5")
        if abs(self.pitch_semitones) > 4.0:
            raise InvalidBand("|pitch_semitones| must be <= 4")


def add_awgn(clip: AudioClip, snr_db: float, seed: int) -> AudioClip:
    """Add white Gaussian noise scaled so the signal/noise power ratio is ``snr_db``."""
    require_standard(clip)
    if math.isinf(snr_db) and snr_db > 0:
        return AudioClip(clip.samples.copy(), clip.sample_rate)
    p_signal = float(np.mean(clip.samples ** 2))
    if p_signal <= 0.0:
        raise SilentClip("SNR is undefined for an all-zero clip")
    sigma = math.sqrt(p_signal / 10.0 ** (snr_db / 10.0))
    noise = RandomStream(seed).normal(len(clip.samples), std=sigma)
    return AudioClip(clip.samples + noise, clip.sample_rate)


@njit(cache=True)
def _run_biquads(x, coeffs):
    # direct form II transposed, sections applied in sequence, zero initial state
    y = x.copy()
    for s in range(coeffs.shape[0]):
        b0, b1, b2, a1, a2 = coeffs[s]
        z1 = 0.0
        z2 = 0.0
        for n in range(y.shape[0]):
            v = y[n]
            out = b0 * v + z1
            z1 = b1 * v - a1 * out + z2
            z2 = b2 * v - a2 * out
            y[n] = out
    return y


def _butterworth_sections(freq_hz: float, order: int, highpass: bool, sr: int) -> np.ndarray:
    """Biquad coefficients for a Butterworth low/high-pass of even ``order``.

    Section k carries the Butterworth pole-pair quality 1/(2 sin theta_k),
    theta_k = pi(2k+1)/(2 order); bilinear transform with the usual prewarp.
    """
    sections = np.empty((order // 2, 5))
    w0 = 2.0 * math.pi * freq_hz / sr
    cosw = math.cos(w0)
    sinw = math.sin(w0)
    for k in range(order // 2):
        q = 1.0 / (2.0 * math.sin(math.pi * (2 * k + 1) / (2 * order)))
        alpha = sinw / (2.0 * q)
        a0 = 1.0 + alpha
        if highpass:
            b0 = (1.0 + cosw) / 2.0
            b1 = -(1.0 + cosw)
        else:
            b0 = (1.0 - cosw) / 2.0
            b1 = 1.0 - cosw
        b2 = b0
        a1 = -2.0 * cosw
        a2 = 1.0 - alpha
        sections[k] = (b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0)
    return sections


def bandpass_filter(clip: AudioClip, lo_hz: float, hi_hz: float, order: int = 4) -> AudioClip:
    """Single-pass causal bandpass: Butterworth high-pass at ``lo_hz`` cascaded
    with a Butterworth low-pass at ``hi_hz``, each of the given even order."""
    require_standard(clip)
    if not 0.0 < lo_hz < hi_hz < clip.sample_rate / 2:
        raise InvalidBand(f"need 0 < lo < hi < Nyquist, got [{lo_hz}, {hi_hz}]")
    if order not in (2, 4, 8):
        raise InvalidBand(f"order must be one of 2, 4, 8, got {order}")
    coeffs = np.vstack(
        [
            _butterworth_sections(lo_hz, order, True, clip.sample_rate),
            _butterworth_sections(hi_hz, order, False, clip.sample_rate),
        ]
    )
    return AudioClip(_run_biquads(clip.samples, coeffs), clip.sample_rate)


def time_shift(clip: AudioClip, shift_fraction: float) -> AudioClip:
    """Circular rotation by round(shift_fraction * length) samples; energy-exact."""
    require_standard(clip)
    if abs(shift_fraction) > 0.5:
        raise ShapeMismatch("|shift_fraction| must be <= 0.5")
    shift = int(round(shift_fraction * len(clip.samples)))
    return AudioClip(np.roll(clip.samples, shift), clip.sample_rate)


def _phase_vocoder(spec: np.ndarray, rate: float, n_fft: int, hop: int) -> np.ndarray:
    """Resample the STFT time axis by ``rate`` while accumulating phase."""
    n_bins, n_frames = spec.shape
    steps = np.arange(0.0, n_frames, rate)
    padded = np.concatenate([spec, np.zeros((n_bins, 1), dtype=spec.dtype)], axis=1)
    expected = hop * 2.0 * np.pi * np.arange(n_bins) / n_fft
    out = np.empty((n_bins, len(steps)), dtype=np.complex128)
    phase = np.angle(padded[:, 0])
    for t, step in enumerate(steps):
        i = int(step)
        frac = step - i
        c0 = padded[:, i]
        c1 = padded[:, i + 1]
        mag = (1.0 - frac) * np.abs(c0) + frac * np.abs(c1)
        out[:, t] = mag * np.exp(1j * phase)
        dphi = np.angle(c1) - np.angle(c0) - expected
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        phase = phase + expected + dphi
    return out


def pitch_shift(clip: AudioClip, semitones: float, n_fft: int = 2048, hop: int = 512) -> AudioClip:
    """Shift pitch by ``semitones`` while keeping duration: phase-vocoder time
    stretch by 2^(semitones/12), then resample back to the original length."""
    require_standard(clip)
    if semitones == 0.0:
        return AudioClip(clip.samples.copy(), clip.sample_rate)
    factor = 2.0 ** (semitones / 12.0)
    stretched = dsp.istft(_phase_vocoder(dsp.stft(clip.samples, n_fft, hop), 1.0 / factor, n_fft, hop), n_fft, hop)
    # a short interpolation kernel is plenty here; the vocoder is the
    # quality-limiting step
    return AudioClip(dsp.resample_to_length(stretched, len(clip.samples), taps=12), clip.sample_rate)


AUGMENT_KINDS = ("awgn", "bandpass", "shift", "pitch")


def augment_variants(clip: AudioClip, spec: AugmentSpec, clip_key: str) -> dict[str, AudioClip]:
    """The four augmented variants of one training clip.

    Stochastic choices come from a substream of ``spec.seed`` keyed by
    ``clip_key``, so each clip's variants are reproducible in isolation.
    """
    stream = RandomStream(spec.seed).substream(hash_key(clip_key))
    shift = float(stream.uniform(1, -spec.shift_fraction, spec.shift_fraction)[0])
    semis = float(stream.uniform(1, -spec.pitch_semitones, spec.pitch_semitones)[0])
    noise_seed = int(stream.bits(1)[0])
    return {
        "awgn": add_awgn(clip, spec.snr_db, noise_seed),
        "bandpass": bandpass_filter(clip, spec.band_lo_hz, spec.band_hi_hz, spec.band_order),
        "shift": time_shift(clip, shift),
        "pitch": pitch_shift(clip, semis),
    }
