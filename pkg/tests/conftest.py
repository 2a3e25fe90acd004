import numpy as np
import pytest

from afen.audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip


def make_tone(freq: float, amplitude: float = 0.7, seconds: float | None = None,
              sr: int = SAMPLE_RATE) -> AudioClip:
    n = CLIP_SAMPLES if seconds is None else int(round(seconds * sr))
    t = np.arange(n) / sr
    return AudioClip(amplitude * np.sin(2.0 * np.pi * freq * t), sr)


@pytest.fixture(scope="session")
def tone440() -> AudioClip:
    return make_tone(440.0)


@pytest.fixture(scope="session")
def bin40_tone() -> AudioClip:
    # exactly centered on FFT bin 40: 40 * 22050 / 2048
    return make_tone(40 * SAMPLE_RATE / 2048, amplitude=0.5)


@pytest.fixture(scope="session")
def noise_clip() -> AudioClip:
    rng = np.random.default_rng(1234)
    return AudioClip(rng.uniform(-0.8, 0.8, CLIP_SAMPLES), SAMPLE_RATE)
