"""Synthetic eight-class corpus for end-to-end verification.

Each class has a distinct spectral signature (tones, chirps, noise bands,
amplitude modulation) with per-clip jitter, written in the same layout the
real corpus uses: WAV files named patient_rec_location_mode_equipment plus a
patient_diagnosis.csv. Class names reuse the diagnosis labels so the
pipeline runs unmodified.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, write_wav
from .dataset import CHEST_LOCATIONS
from .errors import ConfigError
from .metrics import DIAGNOSIS_CLASSES
from .rng import RandomStream

_T = np.arange(CLIP_SAMPLES) / SAMPLE_RATE


def _tone(freq: float, phase: float = 0.0) -> np.ndarray:
    return np.sin(2.0 * np.pi * freq * _T + phase)


def _chirp(f0: float, f1: float, phase: float = 0.0) -> np.ndarray:
    # linear sweep: instantaneous frequency f0 -> f1 over the clip
    k = (f1 - f0) / _T[-1]
    return np.sin(2.0 * np.pi * (f0 * _T + 0.5 * k * _T * _T) + phase)


def _noise_band(stream: RandomStream, lo: float, hi: float) -> np.ndarray:
    spec = np.fft.rfft(stream.normal(CLIP_SAMPLES))
    freqs = np.fft.rfftfreq(CLIP_SAMPLES, 1.0 / SAMPLE_RATE)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    x = np.fft.irfft(spec, CLIP_SAMPLES)
    return x / max(np.max(np.abs(x)), 1e-12)


def _signature(class_index: int, stream: RandomStream) -> np.ndarray:
    jitter = 1.0 + float(stream.uniform(1, -0.03, 0.03)[0])
    phase = float(stream.uniform(1, 0.0, 2.0 * np.pi)[0])
    if class_index == 0:
        return _tone(220.0 * jitter, phase) + 0.4 * _tone(440.0 * jitter, phase)
    if class_index == 1:
        return _tone(1760.0 * jitter, phase)
    if class_index == 2:
        return _chirp(200.0 * jitter, 3000.0 * jitter, phase)
    if class_index == 3:
        return _chirp(3000.0 * jitter, 200.0 * jitter, phase)
    if class_index == 4:
        return _noise_band(stream, 200.0 * jitter, 700.0 * jitter)
    if class_index == 5:
        return _noise_band(stream, 3000.0 * jitter, 6000.0 * jitter)
    if class_index == 6:
        mod = 0.1 + 0.9 * 0.5 * (1.0 + np.sin(2.0 * np.pi * 6.0 * _T))
        return mod * _tone(660.0 * jitter, phase)
    if class_index == 7:
        return (
            _tone(330.0 * jitter, phase)
            + 0.6 * _tone(990.0 * jitter, phase)
            + 0.4 * _tone(1650.0 * jitter, phase)
        )
    raise ConfigError(f"no signature for class {class_index}")


def synth_clip(class_index: int, clip_index: int, seed: int = 0) -> AudioClip:
    stream = RandomStream(seed).substream(f"synth/{class_index}/{clip_index}")
    x = _signature(class_index, stream)
    x = x / max(np.max(np.abs(x)), 1e-12)
    amp = float(stream.uniform(1, 0.4, 0.8)[0])
    noise = stream.normal(CLIP_SAMPLES, std=amp * 10 ** (-30 / 20))  # 30 dB down
    return AudioClip(np.clip(amp * x + noise, -1.0, 1.0), SAMPLE_RATE)


def generate_corpus(out_dir: str | Path, clips_per_class: int = 30, seed: int = 0) -> list[Path]:
    """Write clips_per_class x 8 WAVs plus the diagnosis table; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if clips_per_class < 1:
        raise ConfigError("clips_per_class must be >= 1")
    paths = []
    rows = []
    for class_index, label in enumerate(DIAGNOSIS_CLASSES):
        for clip_index in range(clips_per_class):
            patient = 100 + class_index * clips_per_class + clip_index
            location = CHEST_LOCATIONS[(class_index + clip_index) % len(CHEST_LOCATIONS)]
            name = f"{patient}_1b1_{location}_sc_Synth.wav"
            clip = synth_clip(class_index, clip_index, seed)
            write_wav(clip, out_dir / name)
            paths.append(out_dir / name)
            rows.append(f"{patient},{label}")
    (out_dir / "patient_diagnosis.csv").write_text("\n".join(rows) + "\n")
    return paths
