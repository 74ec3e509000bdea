"""Signal-layer tests: waveform IO, STFT framing, mel extraction, clip slicing.

Expected values are either closed-form DSP identities (Parseval, windowed
sine peaks, HTK mel points) or independently recomputed in the test body.
"""

import math

import numpy as np
import pytest
import scipy.io.wavfile
import scipy.signal
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import noise_wave, sine_wave
from flowvoc.errors import ValidationError
from flowvoc.signal import (
    SAMPLE_RATE,
    MelConfig,
    MelStats,
    Waveform,
    compute_mel_stats,
    extract_mel,
    hz_to_mel,
    load_waveform,
    mel_band_edges,
    mel_filterbank,
    mel_to_hz,
    resample,
    save_waveform,
    slice_clip,
    standardize_mel,
    stft_power,
)

LOG_FLOOR = np.float32(math.log(1e-5))


class TestWaveform:
    def test_casts_to_float32(self):
        w = Waveform(np.zeros(10, dtype=np.float64))
        assert w.samples.dtype == np.float32
        assert w.sample_rate == SAMPLE_RATE

    def test_rejects_bad_shapes_and_values(self):
        with pytest.raises(ValidationError):
            Waveform(np.zeros((2, 10), dtype=np.float32))
        with pytest.raises(ValidationError):
            Waveform(np.zeros(0, dtype=np.float32))
        with pytest.raises(ValidationError):
            Waveform(np.array([0.0, np.nan], dtype=np.float32))
        with pytest.raises(ValidationError):
            Waveform(np.zeros(10, dtype=np.float32), sample_rate=22050)


class TestWavIO:
    def test_roundtrip_is_16_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1.0, 1.0, 4000).astype(np.float32)
        path = tmp_path / "x.wav"
        save_waveform(path, Waveform(x))
        loaded = load_waveform(path)
        expected = np.clip(np.round(x.astype(np.float64) * 32768.0), -32768, 32767) / 32768.0
        assert loaded.sample_rate == SAMPLE_RATE
        assert np.array_equal(loaded.samples, expected.astype(np.float32))

    def test_save_clips_out_of_range(self, tmp_path):
        path = tmp_path / "hot.wav"
        save_waveform(path, Waveform(np.array([1.5, -1.5, 0.0], dtype=np.float32)))
        loaded = load_waveform(path)
        assert loaded.samples[0] == pytest.approx(32767 / 32768)
        assert loaded.samples[1] == -1.0

    def test_load_downmixes_and_resamples(self, tmp_path):
        rng = np.random.default_rng(11)
        stereo = (rng.uniform(-0.5, 0.5, (4800, 2)) * 32767).astype(np.int16)
        path = tmp_path / "stereo48k.wav"
        scipy.io.wavfile.write(path, 48000, stereo)
        loaded = load_waveform(path)
        mono = stereo.astype(np.float64).mean(axis=1) / 32768.0
        expected = scipy.signal.resample_poly(mono, 1, 2)
        assert loaded.sample_rate == SAMPLE_RATE
        assert loaded.samples.shape == (2400,)
        assert np.allclose(loaded.samples, np.clip(expected, -1, 1), atol=1e-6)


class TestResample:
    def test_matches_polyphase_reference(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(22050)
        y = resample(x, 22050, 24000)
        expected = scipy.signal.resample_poly(x, 160, 147)
        assert np.allclose(y, expected, atol=1e-9)

    def test_preserves_tone_frequency(self):
        rate = 22050
        t = np.arange(rate) / rate
        x = np.sin(2 * np.pi * 3000.0 * t)
        y = resample(x, rate, 24000)
        spectrum = np.abs(np.fft.rfft(y * np.hanning(len(y))))
        peak_hz = np.argmax(spectrum) * 24000 / len(y)
        assert abs(peak_hz - 3000.0) < 2.0

    def test_identity_when_rates_match(self):
        x = np.arange(100, dtype=np.float64)
        assert resample(x, 24000, 24000) is x or np.array_equal(resample(x, 24000, 24000), x)


class TestStftPower:
    def test_frame_count_is_floor_len_over_hop(self):
        for n, frames in ((8700, 29), (20400, 68), (1200, 4), (1499, 4)):
            p = stft_power(np.zeros(n), window_length=1200, hop_length=300)
            assert p.power.shape == (frames, 1025)

    def test_parseval_rect_window(self):
        # No padding when window == hop; raw |rfft|^2 must satisfy
        # |X_0|^2 + |X_N/2|^2 + 2 sum_mid |X_k|^2 == N * sum x^2 per frame.
        rng = np.random.default_rng(2)
        x = rng.standard_normal(2304)
        p = stft_power(x, window_length=256, hop_length=256, n_fft=256, window="rect")
        assert p.power.shape == (9, 129)
        for t in range(9):
            frame = x[t * 256 : (t + 1) * 256]
            onesided = p.power[t, 0] + p.power[t, 128] + 2 * p.power[t, 1:128].sum()
            assert onesided == pytest.approx(256.0 * np.sum(frame**2), rel=1e-9)

    def test_bin_centered_sine_peak_hann(self):
        # Periodic-Hann kernel is exactly zero beyond +-1 bin, so a cosine on
        # bin 100 gives |X[100]| = A*N/4 and |X[100 +- 1]| = A*N/8.
        n = 2048
        a = 0.5
        freq = 100 * SAMPLE_RATE / n
        t = np.arange(2 * n) / SAMPLE_RATE
        x = a * np.cos(2 * np.pi * freq * t)
        p = stft_power(x, window_length=n, hop_length=n, n_fft=n)
        assert p.power.shape[0] == 2
        for row in p.power:
            assert row[100] == pytest.approx((a * n / 4) ** 2, rel=1e-6)
            assert row[99] == pytest.approx((a * n / 8) ** 2, rel=1e-6)
            assert row[101] == pytest.approx((a * n / 8) ** 2, rel=1e-6)
            assert row[103] < 1e-12 * row[100]

    def test_impulse_stays_local_in_time(self):
        # Frame t covers samples [t*300 - 450, t*300 + 750); an impulse at
        # 6000 may only touch frames 18..21.
        x = np.zeros(8700)
        x[6000] = 1.0
        p = stft_power(x, window_length=1200, hop_length=300)
        hot = np.nonzero(p.power.sum(axis=1) > 0)[0]
        assert hot.min() >= 18 and hot.max() <= 21

    def test_rejects_short_input_and_bad_window(self):
        with pytest.raises(ValidationError):
            stft_power(np.zeros(600), window_length=1200, hop_length=300)
        with pytest.raises(ValidationError):
            stft_power(np.zeros(2400), window="blackman")


class TestMelScale:
    def test_htk_reference_points(self):
        assert hz_to_mel(0.0) == 0.0
        assert hz_to_mel(1000.0) == pytest.approx(2595.0 * math.log10(1 + 1000.0 / 700.0))
        assert mel_to_hz(hz_to_mel(6300.0)) == pytest.approx(6300.0, rel=1e-12)

    @settings(deadline=None, max_examples=50)
    @given(st.floats(min_value=0.0, max_value=20000.0))
    def test_roundtrip_and_monotonicity(self, hz):
        assert mel_to_hz(hz_to_mel(hz)) == pytest.approx(hz, rel=1e-9, abs=1e-9)
        assert hz_to_mel(hz + 1.0) > hz_to_mel(hz)

    def test_filterbank_matches_direct_construction(self):
        cfg = MelConfig()
        bank = mel_filterbank(cfg)
        assert bank.shape == (80, 1025)
        fft_hz = np.arange(1025) * (24000 / 2048)
        lo_mel = 2595.0 * np.log10(1 + 50.0 / 700.0)
        hi_mel = 2595.0 * np.log10(1 + 12000.0 / 700.0)
        edges = 700.0 * (10.0 ** (np.linspace(lo_mel, hi_mel, 82) / 2595.0) - 1.0)
        for i in (0, 20, 41, 79):
            rising = (fft_hz - edges[i]) / (edges[i + 1] - edges[i])
            falling = (edges[i + 2] - fft_hz) / (edges[i + 2] - edges[i + 1])
            expected = np.maximum(0.0, np.minimum(rising, falling))
            assert np.allclose(bank[i], expected, atol=1e-12)

    def test_filterbank_support_and_peaks(self):
        cfg = MelConfig()
        bank = mel_filterbank(cfg)
        edges = mel_band_edges(cfg)
        fft_hz = np.arange(1025) * (24000 / 2048)
        assert np.all(bank >= 0)
        assert np.all(bank <= 1.0 + 1e-12)
        assert np.all(bank.sum(axis=1) > 0)
        for i in range(80):
            support = np.nonzero(bank[i])[0]
            assert fft_hz[support.min()] > edges[i] - 12.0
            assert fft_hz[support.max()] < edges[i + 2] + 12.0


class TestExtractMel:
    def test_shapes_and_frame_rate(self):
        for seconds, frames in ((0.3625, 29), (0.85, 68)):
            mel = extract_mel(sine_wave(440.0, seconds))
            assert mel.frames.shape == (frames, 80)
            assert mel.frames.dtype == np.float32
            assert mel.frame_rate == pytest.approx(80.0)

    def test_silence_hits_log_floor_exactly(self):
        mel = extract_mel(Waveform(np.zeros(8700, dtype=np.float32)))
        assert np.all(mel.frames == LOG_FLOOR)

    def test_tone_energy_lands_in_band_containing_tone(self):
        mel = extract_mel(sine_wave(1000.0, 0.85))
        band = int(np.argmax(mel.frames.mean(axis=0)))
        edges = mel_band_edges(MelConfig())
        assert edges[band] < 1000.0 < edges[band + 2]

    def test_rejects_sub_window_input(self):
        with pytest.raises(ValidationError):
            extract_mel(Waveform(np.zeros(600, dtype=np.float32)))


class TestMelStats:
    def test_matches_numpy_moments(self):
        mels = [extract_mel(noise_wave(8700, seed=s)) for s in range(3)]
        stats = compute_mel_stats(mels)
        stacked = np.concatenate([m.frames for m in mels], axis=0).astype(np.float64)
        assert np.allclose(stats.mean, stacked.mean(axis=0), atol=1e-5)
        assert np.allclose(stats.std, stacked.std(axis=0), atol=1e-5)
        z = standardize_mel(mels[0].frames, stats)
        back = z * np.maximum(stats.std, 1e-3) + stats.mean
        assert np.allclose(back, mels[0].frames, atol=1e-4)

    def test_degenerate_channel_is_floored_at_standardize_time(self):
        # Silence mels are constant per channel; the raw std is ~0 but
        # standardization must divide by at least 1e-3.
        mels = [extract_mel(Waveform(np.zeros(12000, dtype=np.float32)))]
        stats = compute_mel_stats(mels)
        assert np.all(stats.std < 1e-3)
        z = standardize_mel(mels[0].frames, stats)
        assert np.all(np.isfinite(z))
        assert np.all(np.abs(z) < 1e-2)
        explicit = standardize_mel(
            np.full((4, 80), 7.0, dtype=np.float32),
            MelStats(mean=np.full(80, 7.0, dtype=np.float32), std=np.zeros(80, dtype=np.float32)),
        )
        assert np.all(explicit == 0.0)


class TestSliceClip:
    def _locate_offset(self, wave, clip):
        n = len(clip.audio)
        for f in range((len(wave.samples) - n) // 300 + 1):
            if np.array_equal(wave.samples[f * 300 : f * 300 + n], clip.audio):
                return f
        raise AssertionError("clip is not a hop-aligned slice of the source")

    def test_clip_is_hop_aligned_and_mel_consistent(self):
        wave = noise_wave(8700, seed=21)
        mel = extract_mel(wave)
        seen = set()
        for seed in range(120):
            clip = slice_clip(wave, mel, 0.05, np.random.default_rng(seed), "u1")
            assert clip.audio.shape == (1200,)
            assert clip.mel.shape == (4, 80)
            f = self._locate_offset(wave, clip)
            assert np.array_equal(clip.mel, mel.frames[f : f + 4])
            seen.add(f)
        # 26 valid offsets; 120 uniform draws should cover most of them.
        assert len(seen) >= 20

    def test_exact_length_clip_is_identity(self):
        wave = noise_wave(8700, seed=4)
        mel = extract_mel(wave)
        clip = slice_clip(wave, mel, 8700 / 24000, np.random.default_rng(0), "u")
        assert np.array_equal(clip.audio, wave.samples)
        assert np.array_equal(clip.mel, mel.frames)
        assert clip.utterance_id == "u"

    def test_rejects_clip_longer_than_source(self):
        wave = noise_wave(2400, seed=1)
        mel = extract_mel(wave)
        with pytest.raises(ValidationError):
            slice_clip(wave, mel, 1.0, np.random.default_rng(0))
