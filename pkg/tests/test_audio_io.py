import struct

import numpy as np
import pytest

from afen.audio_io import (
    CLIP_SAMPLES,
    SAMPLE_RATE,
    AudioClip,
    decode_wav,
    read_wav,
    standardize_clip,
    write_wav,
)
from afen.errors import EmptyClip, MalformedRiff, TruncatedData, UnsupportedEncoding
from conftest import make_tone
from oracles import dominant_frequency


def wav_bytes(payload: bytes, fmt_tag=1, channels=1, rate=22050, bits=16) -> bytes:
    block = channels * bits // 8
    return struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, fmt_tag, channels, rate, rate * block, block, bits,
        b"data", len(payload),
    ) + payload


class TestDecode:
    def test_16bit_scaling_identity(self):
        clip = decode_wav(wav_bytes(struct.pack("<3h", 0, 16384, -32768)))
        np.testing.assert_array_equal(clip.samples, [0.0, 0.5, -1.0])
        assert clip.sample_rate == 22050

    def test_stereo_averages_to_mono(self):
        payload = struct.pack("<2h", 16384, -16384)  # L=0.5, R=-0.5
        clip = decode_wav(wav_bytes(payload, channels=2))
        np.testing.assert_array_equal(clip.samples, [0.0])

    def test_24bit_scaling(self):
        payload = bytes([0xFF, 0xFF, 0x7F])  # 0x7FFFFF
        clip = decode_wav(wav_bytes(payload, bits=24))
        assert clip.samples[0] == pytest.approx(8388607 / 8388608, abs=1e-12)

    def test_32bit_float(self):
        payload = struct.pack("<2f", 0.25, -0.75)
        clip = decode_wav(wav_bytes(payload, fmt_tag=3, bits=32))
        np.testing.assert_allclose(clip.samples, [0.25, -0.75], atol=1e-7)

    def test_32bit_int(self):
        payload = struct.pack("<i", -(2 ** 31))
        clip = decode_wav(wav_bytes(payload, bits=32))
        assert clip.samples[0] == -1.0

    def test_bad_magic_rejected(self):
        with pytest.raises(MalformedRiff):
            decode_wav(b"RIFX" + b"\x00" * 40)

    def test_missing_data_chunk(self):
        header_only = wav_bytes(b"")[:36]  # drop the data chunk header
        with pytest.raises(MalformedRiff):
            decode_wav(header_only)

    def test_truncated_data_chunk(self):
        full = wav_bytes(struct.pack("<10h", *range(10)))
        with pytest.raises(TruncatedData):
            decode_wav(full[:-7])

    def test_compressed_format_rejected(self):
        with pytest.raises(UnsupportedEncoding):
            decode_wav(wav_bytes(b"\x00\x00", fmt_tag=7))  # mu-law

    def test_8bit_rejected(self):
        with pytest.raises(UnsupportedEncoding):
            decode_wav(wav_bytes(b"\x80", bits=8))

    def test_three_channels_rejected(self):
        with pytest.raises(UnsupportedEncoding):
            decode_wav(wav_bytes(b"\x00" * 6, channels=3))


class TestRoundTrip:
    def test_single_zero(self, tmp_path):
        write_wav(AudioClip(np.array([0.0]), 22050), tmp_path / "z.wav")
        back = read_wav(tmp_path / "z.wav")
        np.testing.assert_array_equal(back.samples, [0.0])

    def test_full_scale_bound(self, tmp_path):
        write_wav(AudioClip(np.array([1.0, -1.0]), 22050), tmp_path / "f.wav")
        back = read_wav(tmp_path / "f.wav")
        assert np.max(np.abs(back.samples - [1.0, -1.0])) <= 2 ** -15

    def test_seeded_random_error_bound(self, tmp_path):
        rng = np.random.default_rng(99)
        x = rng.uniform(-1.0, 1.0, 1000)
        write_wav(AudioClip(x, 8000), tmp_path / "r.wav")
        back = read_wav(tmp_path / "r.wav")
        assert back.sample_rate == 8000
        assert np.max(np.abs(back.samples - x)) <= 2 ** -15

    def test_round_trip_property_many_seeds(self, tmp_path):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = rng.uniform(-1.0, 1.0, 257)
            write_wav(AudioClip(x, 22050), tmp_path / "p.wav")
            back = read_wav(tmp_path / "p.wav")
            assert np.max(np.abs(back.samples - x)) <= 2 ** -15

    def test_float32_cache_mode_is_lossless_for_f32(self, tmp_path):
        x = np.random.default_rng(5).uniform(-1, 1, 500).astype(np.float32).astype(np.float64)
        write_wav(AudioClip(x, 22050), tmp_path / "c.wav", float32=True)
        back = read_wav(tmp_path / "c.wav")
        np.testing.assert_array_equal(back.samples, x)


class TestStandardize:
    def test_identity_for_standard_input(self):
        clip = make_tone(500.0)
        out = standardize_clip(clip)
        np.testing.assert_array_equal(out.samples, clip.samples)

    def test_twelve_seconds_at_44100(self):
        clip = make_tone(440.0, seconds=12.0, sr=44100)
        out = standardize_clip(clip)
        assert len(out.samples) == CLIP_SAMPLES and out.sample_rate == SAMPLE_RATE
        freq = dominant_frequency(out.samples, SAMPLE_RATE)
        assert abs(freq - 440.0) / 440.0 < 0.01

    def test_short_clip_zero_padded(self):
        clip = make_tone(300.0, seconds=2.0)
        out = standardize_clip(clip)
        assert len(out.samples) == CLIP_SAMPLES
        np.testing.assert_array_equal(out.samples[:44100], clip.samples)
        np.testing.assert_array_equal(out.samples[44100:], 0.0)

    def test_length_invariant_across_rates_and_durations(self):
        for sr, seconds in [(8000, 1.0), (16000, 7.3), (44100, 0.5), (48000, 10.0)]:
            out = standardize_clip(make_tone(200.0, seconds=seconds, sr=sr))
            assert len(out.samples) == CLIP_SAMPLES
            assert out.sample_rate == SAMPLE_RATE

    def test_tone_preserved_below_8k(self):
        for freq in (440.0, 2000.0, 7900.0):
            out = standardize_clip(make_tone(freq, seconds=8.0, sr=44100))
            got = dominant_frequency(out.samples, SAMPLE_RATE)
            assert abs(got - freq) / freq < 0.01


class TestClipInvariants:
    def test_empty_rejected(self):
        with pytest.raises(EmptyClip):
            AudioClip(np.array([]), 22050)

    def test_nan_rejected(self):
        with pytest.raises(EmptyClip):
            AudioClip(np.array([0.0, np.nan]), 22050)

    def test_bad_rate_rejected(self):
        with pytest.raises(EmptyClip):
            AudioClip(np.array([0.0]), 0)
