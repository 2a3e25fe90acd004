import numpy as np
import pytest

from afen import augment
from afen.audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip
from afen.errors import InvalidBand, ShapeMismatch, SilentClip
from conftest import make_tone
from oracles import dominant_frequency, measured_snr_db

TRIM = SAMPLE_RATE  # one second to let filter transients die


class TestAwgn:
    def test_infinite_snr_is_identity(self, tone440):
        out = augment.add_awgn(tone440, np.inf, seed=1)
        np.testing.assert_array_equal(out.samples, tone440.samples)

    def test_target_snr_within_half_db(self, tone440):
        for snr in (10.0, 20.0, 30.0):
            out = augment.add_awgn(tone440, snr, seed=7)
            assert abs(measured_snr_db(tone440.samples, out.samples) - snr) <= 0.5

    def test_deterministic_given_seed(self, tone440):
        a = augment.add_awgn(tone440, 20.0, seed=42)
        b = augment.add_awgn(tone440, 20.0, seed=42)
        np.testing.assert_array_equal(a.samples, b.samples)
        c = augment.add_awgn(tone440, 20.0, seed=43)
        assert np.any(a.samples != c.samples)

    def test_silent_clip_rejected(self):
        with pytest.raises(SilentClip):
            augment.add_awgn(AudioClip(np.zeros(CLIP_SAMPLES), SAMPLE_RATE), 20.0, seed=0)


class TestBandpass:
    def test_in_band_tone_within_1_db(self, tone440):
        out = augment.bandpass_filter(tone440, 100.0, 2000.0, order=4)
        rms_in = np.sqrt(np.mean(tone440.samples[TRIM:] ** 2))
        rms_out = np.sqrt(np.mean(out.samples[TRIM:] ** 2))
        assert abs(20.0 * np.log10(rms_out / rms_in)) <= 1.0

    def test_octave_outside_attenuated(self):
        # one octave above the 2000 Hz edge; bound is 6*order - 3 dB
        for order in (2, 4, 8):
            tone = make_tone(4000.0)
            out = augment.bandpass_filter(tone, 100.0, 2000.0, order=order)
            rms_in = np.sqrt(np.mean(tone.samples[TRIM:] ** 2))
            rms_out = np.sqrt(np.mean(out.samples[TRIM:] ** 2))
            assert -20.0 * np.log10(rms_out / rms_in) >= 6 * order - 3

    def test_far_stopband_tone(self):
        tone = make_tone(8000.0)
        out = augment.bandpass_filter(tone, 100.0, 2000.0, order=4)
        rms_in = np.sqrt(np.mean(tone.samples[TRIM:] ** 2))
        rms_out = np.sqrt(np.mean(out.samples[TRIM:] ** 2))
        assert -20.0 * np.log10(rms_out / rms_in) >= 21.0

    def test_dc_removed(self):
        dc = AudioClip(np.full(CLIP_SAMPLES, 0.5), SAMPLE_RATE)
        out = augment.bandpass_filter(dc, 100.0, 2000.0, order=4)
        assert np.sqrt(np.mean(out.samples[TRIM:] ** 2)) <= 0.01

    def test_invalid_band_rejected(self, tone440):
        with pytest.raises(InvalidBand):
            augment.bandpass_filter(tone440, 2000.0, 100.0, order=4)
        with pytest.raises(InvalidBand):
            augment.bandpass_filter(tone440, 100.0, 12000.0, order=4)
        with pytest.raises(InvalidBand):
            augment.bandpass_filter(tone440, 100.0, 2000.0, order=3)


class TestTimeShift:
    def test_zero_shift_identity(self, tone440):
        np.testing.assert_array_equal(augment.time_shift(tone440, 0.0).samples, tone440.samples)

    def test_impulse_moves_to_index(self):
        x = np.zeros(CLIP_SAMPLES)
        x[0] = 1.0
        out = augment.time_shift(AudioClip(x, SAMPLE_RATE), 100 / CLIP_SAMPLES)
        assert out.samples[100] == 1.0 and out.samples.sum() == 1.0

    def test_energy_exactly_preserved(self, noise_clip):
        out = augment.time_shift(noise_clip, 0.37)
        # the output is an exact permutation of the input, so its energy is
        # the same multiset sum; sort before comparing bitwise
        np.testing.assert_array_equal(np.sort(out.samples), np.sort(noise_clip.samples))
        assert np.isclose(np.sum(out.samples ** 2), np.sum(noise_clip.samples ** 2), rtol=1e-12)

    def test_fraction_bound(self, tone440):
        with pytest.raises(ShapeMismatch):
            augment.time_shift(tone440, 0.6)


class TestPitchShift:
    def test_zero_semitones_keeps_frequency(self, tone440):
        out = augment.pitch_shift(tone440, 0.0)
        got = dominant_frequency(out.samples, SAMPLE_RATE)
        assert abs(got - 440.0) / 440.0 < 0.005

    def test_up_one_octave(self, tone440):
        out = augment.pitch_shift(tone440, +12.0)
        assert len(out.samples) == CLIP_SAMPLES
        got = dominant_frequency(out.samples, SAMPLE_RATE)
        assert abs(got - 880.0) / 880.0 < 0.03

    def test_down_one_octave(self, tone440):
        out = augment.pitch_shift(tone440, -12.0)
        got = dominant_frequency(out.samples, SAMPLE_RATE)
        assert abs(got - 220.0) / 220.0 < 0.03

    def test_fractional_shift(self, tone440):
        out = augment.pitch_shift(tone440, 3.0)
        target = 440.0 * 2 ** (3 / 12)
        got = dominant_frequency(out.samples, SAMPLE_RATE)
        assert abs(got - target) / target < 0.03


class TestVariants:
    def test_all_variants_standard_and_deterministic(self, tone440):
        spec = augment.AugmentSpec(seed=11)
        a = augment.augment_variants(tone440, spec, "clip-1")
        b = augment.augment_variants(tone440, spec, "clip-1")
        assert set(a) == {"awgn", "bandpass", "shift", "pitch"}
        for kind in a:
            assert len(a[kind].samples) == CLIP_SAMPLES
            assert a[kind].sample_rate == SAMPLE_RATE
            np.testing.assert_array_equal(a[kind].samples, b[kind].samples)

    def test_distinct_clip_keys_differ(self, tone440):
        spec = augment.AugmentSpec(seed=11)
        a = augment.augment_variants(tone440, spec, "clip-1")
        b = augment.augment_variants(tone440, spec, "clip-2")
        assert np.any(a["awgn"].samples != b["awgn"].samples)

    def test_spec_validation(self):
        with pytest.raises(InvalidBand):
            augment.AugmentSpec(band_lo_hz=3000.0, band_hi_hz=100.0)
        with pytest.raises(InvalidBand):
            augment.AugmentSpec(pitch_semitones=9.0)
