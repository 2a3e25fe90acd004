import numpy as np
import pytest

from afen import dsp
from afen.audio_io import CLIP_SAMPLES, SAMPLE_RATE
from afen.errors import ShapeMismatch
from conftest import make_tone
from oracles import dominant_frequency, naive_dft


class TestFft:
    @pytest.mark.parametrize("n", [1, 2, 4, 16, 64, 256, 1024, 2048])
    def test_matches_naive_dft(self, n):
        rng = np.random.default_rng(n)
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        mine = dsp.fft(x)
        ref = naive_dft(x)
        scale = np.max(np.abs(ref)) or 1.0
        assert np.max(np.abs(mine - ref)) / scale <= 1e-6

    def test_real_frame_vs_naive(self):
        rng = np.random.default_rng(77)
        frame = rng.normal(size=2048)
        mine = dsp.fft(frame)
        ref = naive_dft(frame)
        assert np.max(np.abs(mine - ref)) / np.max(np.abs(ref)) <= 1e-6

    def test_batched_rows(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(5, 128))
        rows = np.stack([dsp.fft(r) for r in x])
        np.testing.assert_allclose(dsp.fft(x), rows, atol=1e-10)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ShapeMismatch):
            dsp.fft(np.zeros(100))

    def test_ifft_inverts(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=512) + 1j * rng.normal(size=512)
        np.testing.assert_allclose(dsp.ifft(dsp.fft(x)), x, atol=1e-10)

    def test_rfft_irfft_round_trip(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=2048)
        np.testing.assert_allclose(dsp.irfft(dsp.rfft(x), 2048), x, atol=1e-10)

    def test_parseval_on_hann_frame(self):
        rng = np.random.default_rng(6)
        frame = rng.normal(size=2048) * dsp.hann_window(2048)
        time_energy = np.sum(frame ** 2)
        freq_energy = np.sum(np.abs(dsp.fft(frame)) ** 2) / 2048
        assert abs(time_energy - freq_energy) / time_energy <= 1e-6


class TestStft:
    def test_zero_clip_gives_zero_matrix(self):
        spec = dsp.stft(np.zeros(CLIP_SAMPLES))
        assert spec.shape == (1025, 259)
        np.testing.assert_array_equal(np.abs(spec), 0.0)

    def test_frame_count_is_259(self):
        assert dsp.stft(np.ones(CLIP_SAMPLES)).shape[1] == 259

    def test_bin_centered_tone_peaks_at_bin_40(self, bin40_tone):
        mag = np.abs(dsp.stft(bin40_tone.samples))
        interior = mag[:, 3:-3]
        np.testing.assert_array_equal(np.argmax(interior, axis=0), 40)

    def test_istft_reconstructs_interior(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=40960)
        y = dsp.istft(dsp.stft(x))
        n = min(len(x), len(y))
        np.testing.assert_allclose(y[2048 : n - 2048], x[2048 : n - 2048], atol=1e-9)


class TestResample:
    @pytest.mark.parametrize("sr_in,freq", [(44100, 440.0), (44100, 4000.0), (48000, 999.0), (16000, 440.0), (44100, 7900.0)])
    def test_tone_frequency_preserved_within_1pct(self, sr_in, freq):
        clip = make_tone(freq, seconds=2.0, sr=sr_in)
        y = dsp.resample(clip.samples, sr_in, SAMPLE_RATE)
        got = dominant_frequency(y, SAMPLE_RATE)
        assert abs(got - freq) / freq < 0.01

    def test_identity_when_rates_match(self):
        x = np.random.default_rng(0).normal(size=1000)
        np.testing.assert_array_equal(dsp.resample(x, 22050, 22050), x)

    def test_output_length(self):
        x = np.zeros(44100)
        assert len(dsp.resample(x, 44100, 22050)) == 22050
        assert len(dsp.resample_to_length(x, 12345)) == 12345

    def test_amplitude_roughly_preserved(self):
        clip = make_tone(1000.0, seconds=1.0, sr=44100)
        y = dsp.resample(clip.samples, 44100, 22050)
        rms_in = np.sqrt(np.mean(clip.samples ** 2))
        rms_out = np.sqrt(np.mean(y[100:-100] ** 2))
        assert abs(rms_out / rms_in - 1.0) < 0.05
