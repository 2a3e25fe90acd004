import numpy as np
import pytest

from afen import features
from afen.audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip
from afen.augment import time_shift
from conftest import make_tone
from oracles import naive_dct2_orthonormal, two_pass_mean_std

BIN_HZ = SAMPLE_RATE / features.N_FFT


@pytest.fixture(scope="module")
def silence():
    return AudioClip(np.zeros(CLIP_SAMPLES), SAMPLE_RATE)


class TestShapes:
    def test_bundle_shape_contract(self, tone440, noise_clip):
        for clip in (tone440, noise_clip):
            b = features.extract_bundle(clip)
            assert b.mfcc.shape == (40, 259)
            assert b.mel.shape == (128, 259)
            assert b.chroma.shape == (12, 259)
            assert b.rolloff.shape == (1, 259)
            assert b.zcr.shape == (1, 259)
            assert b.gbdt_vector.shape == (364,)

    def test_value_ranges(self, noise_clip):
        b = features.extract_bundle(noise_clip)
        assert np.all(b.zcr >= 0.0) and np.all(b.zcr <= 1.0)
        assert np.all(b.rolloff >= 0.0) and np.all(b.rolloff <= SAMPLE_RATE / 2)
        assert np.all(b.chroma >= 0.0)
        assert np.all(b.mel >= 0.0)


class TestStftMagnitude:
    def test_zero_clip(self, silence):
        np.testing.assert_array_equal(features.stft_magnitude(silence), 0.0)

    def test_bin40_tone_argmax(self, bin40_tone):
        mag = features.stft_magnitude(bin40_tone)
        np.testing.assert_array_equal(np.argmax(mag[:, 3:-3], axis=0), 40)


class TestMelFilterbank:
    def test_shape(self):
        assert features.mel_filterbank().shape == (128, 1025)

    def test_peak_weight_is_one_at_center(self):
        # evaluate the triangles at their own center frequencies
        mels = np.linspace(0.0, features.hz_to_mel(11025.0), 130)
        centers = features.mel_to_hz(mels)
        weights = features.triangle_weights(centers, centers[1:-1])
        np.testing.assert_allclose(np.diag(weights), 1.0, atol=1e-12)

    def test_mel_of_700(self):
        assert features.hz_to_mel(700.0) == pytest.approx(2595.0 * np.log10(2.0), abs=1e-9)
        assert features.hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)

    def test_mel_hz_round_trip(self):
        f = np.linspace(0.0, 11025.0, 57)
        np.testing.assert_allclose(features.mel_to_hz(features.hz_to_mel(f)), f, atol=1e-6)

    def test_every_interior_bin_covered(self):
        fb = features.mel_filterbank()
        mels = np.linspace(0.0, features.hz_to_mel(11025.0), 130)
        centers = features.mel_to_hz(mels)
        freqs = features.fft_bin_frequencies()
        interior = (freqs > centers[1]) & (freqs < centers[-2])
        assert np.all(fb.sum(axis=0)[interior] > 0.0)


class TestMelSpectrogram:
    def test_zero_clip(self, silence):
        np.testing.assert_array_equal(features.mel_spectrogram(silence), 0.0)

    def test_white_noise_rows_positive(self, noise_clip):
        mel = features.mel_spectrogram(noise_clip)
        assert np.all(mel.mean(axis=1) > 0.0)

    def test_doubling_amplitude_is_monotone(self, tone440):
        louder = AudioClip(np.clip(tone440.samples, -0.5, 0.5) * 2.0, SAMPLE_RATE)
        base = AudioClip(np.clip(tone440.samples, -0.5, 0.5), SAMPLE_RATE)
        assert np.all(features.mel_spectrogram(louder) >= features.mel_spectrogram(base))


class TestMfcc:
    def test_constant_logmel_column(self):
        c = 3.25
        col = np.full(128, c)
        coeffs = features.dct_matrix() @ col
        assert coeffs[0] == pytest.approx(c * np.sqrt(128.0), rel=1e-12)
        np.testing.assert_allclose(coeffs[1:], 0.0, atol=1e-10)

    def test_dct_rows_orthonormal(self):
        d = features.dct_matrix()
        np.testing.assert_allclose(d @ d.T, np.eye(40), atol=1e-10)

    def test_matches_naive_dct(self, noise_clip):
        mag = features.stft_magnitude(noise_clip)
        logmel = np.log(np.maximum(features.mel_filterbank() @ (mag * mag), 1e-10))
        cols = logmel[:, ::37]  # the naive oracle is O(n^2); subsample frames
        ref = naive_dct2_orthonormal(cols, 40)
        mine = (features.dct_matrix() @ cols)
        assert np.max(np.abs(mine - ref)) <= 1e-8

    def test_full_path_shape_and_finiteness(self, silence):
        m = features.mfcc(silence)
        assert m.shape == (40, 259) and np.all(np.isfinite(m))


class TestChroma:
    def test_zero_clip(self, silence):
        np.testing.assert_array_equal(features.chroma_stft(silence), 0.0)

    def test_440_maps_to_class_a(self, tone440):
        c = features.chroma_stft(tone440)
        np.testing.assert_array_equal(np.argmax(c[:, 3:-3], axis=0), 0)

    def test_octave_folding(self):
        c = features.chroma_stft(make_tone(880.0))
        np.testing.assert_array_equal(np.argmax(c[:, 3:-3], axis=0), 0)

    def test_column_maxima_zero_or_one(self, noise_clip, silence):
        for clip in (noise_clip, silence):
            c = features.chroma_stft(clip)
            maxima = c.max(axis=0)
            assert np.all((maxima == 0.0) | (np.abs(maxima - 1.0) < 1e-12))


class TestRolloff:
    def test_zero_frame_is_zero(self, silence):
        np.testing.assert_array_equal(features.spectral_rolloff(silence), 0.0)

    def test_matches_cumulative_oracle(self, bin40_tone, noise_clip):
        for clip in (bin40_tone, noise_clip):
            mag = features.stft_magnitude(clip)
            energy = mag * mag
            mine = features.spectral_rolloff(clip)
            for frame in range(0, 259, 13):
                col = energy[:, frame]
                total = 0.0
                for v in col:  # same sequential accumulation as the cutoff scan
                    total += v
                if total == 0.0:
                    assert mine[0, frame] == 0.0
                    continue
                cum = 0.0
                for k in range(len(col)):
                    cum += col[k]
                    if cum >= 0.85 * total:
                        break
                assert mine[0, frame] == pytest.approx(k * BIN_HZ, abs=1e-9)

    def test_single_tone_lands_near_its_bin(self, bin40_tone):
        r = features.spectral_rolloff(bin40_tone)
        expected = 40 * BIN_HZ  # 430.66 Hz; windowing spreads it by about a bin
        assert np.all(np.abs(r[0, 3:-3] - expected) <= 2 * BIN_HZ)

    def test_pct_one_hits_highest_nonzero_bin(self, noise_clip):
        mag = features.stft_magnitude(noise_clip)
        energy = mag * mag
        r = features.rolloff_from_energy(energy, pct=1.0)
        for frame in range(0, 259, 29):
            nz = np.flatnonzero(np.cumsum(energy[:, frame]) < np.cumsum(energy[:, frame])[-1])
            highest = nz[-1] + 1 if len(nz) else 0
            assert r[0, frame] == pytest.approx(highest * BIN_HZ, abs=1e-9)


class TestZcr:
    def test_constant_positive_clip(self):
        z = features.zero_crossing_rate(AudioClip(np.full(CLIP_SAMPLES, 0.3), SAMPLE_RATE))
        np.testing.assert_array_equal(z, 0.0)

    def test_alternating_full_rate(self):
        x = np.tile([1.0, -1.0], CLIP_SAMPLES // 2)
        z = features.zero_crossing_rate(AudioClip(x, SAMPLE_RATE))
        np.testing.assert_allclose(z[0, 3:-3], 1.0, atol=1e-12)

    def test_440_sine_analytic_rate(self, tone440):
        z = features.zero_crossing_rate(tone440)
        expected = 2 * 440.0 / SAMPLE_RATE  # 0.0399
        mid = z[0, 10:-10]
        assert np.all(np.abs(mid - expected) / expected < 0.05)

    def test_sign_zero_counts_as_nonnegative(self):
        x = np.zeros(CLIP_SAMPLES)
        x[::2] = -1.0  # alternates -1, 0, -1, 0: every step flips sign class
        z = features.zero_crossing_rate(AudioClip(x, SAMPLE_RATE))
        np.testing.assert_allclose(z[0, 3:-3], 1.0, atol=1e-12)


class TestGbdtVector:
    def test_all_zero_bundle(self):
        b = features.FeatureBundle(
            mfcc=np.zeros((40, 259)),
            mel=np.zeros((128, 259)),
            chroma=np.zeros((12, 259)),
            rolloff=np.zeros((1, 259)),
            zcr=np.zeros((1, 259)),
        )
        assert b.gbdt_vector.shape == (364,)
        np.testing.assert_array_equal(b.gbdt_vector, 0.0)

    def test_constant_row_slots(self):
        mats = {
            "mfcc": np.zeros((40, 259)),
            "mel": np.zeros((128, 259)),
            "chroma": np.zeros((12, 259)),
            "rolloff": np.zeros((1, 259)),
            "zcr": np.zeros((1, 259)),
        }
        mats["mfcc"][7, :] = 2.0
        b = features.FeatureBundle(**mats)
        assert b.gbdt_vector[7] == 2.0  # mean slot of row 7
        assert b.gbdt_vector[40 + 7] == 0.0  # std slot of row 7

    def test_matches_two_pass_oracle(self, noise_clip):
        b = features.extract_bundle(noise_clip)
        vec = b.gbdt_vector
        offset = 0
        for _, mat in b.matrices():
            rows = mat.shape[0]
            for r in range(rows):
                m, s = two_pass_mean_std(mat[r])
                assert abs(vec[offset + r] - m) <= 1e-9
                assert abs(vec[offset + rows + r] - s) <= 1e-9
            offset += 2 * rows


class TestTimeShiftCovariance:
    def test_one_hop_shift_moves_columns_by_one(self, tone440, noise_clip):
        for clip in (tone440, noise_clip):
            base = features.stft_magnitude(clip)
            shifted = features.stft_magnitude(time_shift(clip, 512 / CLIP_SAMPLES))
            # frames that touch neither padded edge see the identical samples
            np.testing.assert_array_equal(shifted[:, 3:257], base[:, 2:256])
            # the stated range including the final padded frame, loosely
            err = np.abs(shifted[:, 3:258] - base[:, 2:257])
            assert err.max() / np.max(np.abs(base[:, 2:257])) < 0.06
