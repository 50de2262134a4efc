"""WAV I/O, resampling, and level calibration."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.io import wavfile

from hapredict.audio import (
    PROCESSING_RATE_HZ,
    SILENCE_FLOOR_DB,
    channel_levels_db_spl,
    level_db_spl,
    read_wav,
    resample,
    rms,
    wav_bytes,
    write_wav,
)
from hapredict.errors import EmptySignalError, FormatError, InvalidArgumentError
from hapredict.model import AudioSignal


class TestWavRoundTrip:
    def test_pcm16_round_trip_is_byte_identical(self, tmp_path, rng):
        x = np.clip(rng.standard_normal(4000) * 0.2, -0.99, 0.99)
        first = tmp_path / "a.wav"
        second = tmp_path / "b.wav"
        write_wav(AudioSignal(x, 16000), first)
        sig = read_wav(first)
        write_wav(sig, second)
        assert first.read_bytes() == second.read_bytes()

    def test_pcm16_scaling(self, tmp_path):
        path = tmp_path / "t.wav"
        write_wav(AudioSignal(np.array([32767.0 / 32768.0, 0.0, -1.0]), 8000), path)
        _, data = wavfile.read(path)
        assert list(data) == [32767, 0, -32768]

    def test_pcm16_clipping_counted_and_saturated(self, tmp_path):
        path = tmp_path / "t.wav"
        clipped = write_wav(AudioSignal(np.array([1.5, 0.0, -2.0]), 8000), path)
        assert clipped == 2
        _, data = wavfile.read(path)
        assert list(data) == [32767, 0, -32768]

    def test_float32_round_trip_preserves_amplitude(self, tmp_path, rng):
        x = rng.standard_normal(1000) * 0.1
        path = tmp_path / "f.wav"
        clipped = write_wav(AudioSignal(x, 44100), path, encoding="float32")
        assert clipped == 0
        sig = read_wav(path)
        np.testing.assert_allclose(sig.samples[0], x.astype(np.float32), atol=0)

    def test_stereo_layout(self, tmp_path):
        left = np.full(16, 0.25)
        right = np.full(16, -0.25)
        path = tmp_path / "s.wav"
        write_wav(AudioSignal(np.stack([left, right]), 16000), path)
        sig = read_wav(path)
        assert sig.n_channels == 2
        np.testing.assert_allclose(sig.channel(0), 0.25, atol=1e-4)
        np.testing.assert_allclose(sig.channel(1), -0.25, atol=1e-4)

    def test_rate_preserved(self, tmp_path):
        path = tmp_path / "r.wav"
        write_wav(AudioSignal(np.zeros(10), 22050), path)
        assert read_wav(path).sample_rate_hz == 22050

    def test_wav_bytes_matches_file(self, tmp_path, rng):
        sig = AudioSignal(rng.standard_normal(500) * 0.1, 16000)
        path = tmp_path / "x.wav"
        write_wav(sig, path)
        assert wav_bytes(sig) == path.read_bytes()

    def test_unknown_encoding_rejected(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            write_wav(AudioSignal(np.zeros(4), 8000), tmp_path / "x.wav", encoding="mp3")


class TestWavErrors:
    def test_unsupported_sample_format_rejected(self, tmp_path):
        path = tmp_path / "i32.wav"
        wavfile.write(path, 8000, np.array([1, 2, 3], dtype=np.int32))
        with pytest.raises(FormatError):
            read_wav(path)

    def test_garbage_file_rejected(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"RIFFnot really a wav at all")
        with pytest.raises(FormatError):
            read_wav(path)

    def test_empty_data_rejected(self, tmp_path):
        path = tmp_path / "empty.wav"
        wavfile.write(path, 8000, np.zeros(0, dtype=np.int16))
        with pytest.raises(EmptySignalError):
            read_wav(path)

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            read_wav(tmp_path / "nope.wav")


class TestResample:
    def test_same_rate_returns_same_object(self):
        sig = AudioSignal(np.zeros(100), 16000)
        assert resample(sig, 16000) is sig

    def test_output_length_is_rounded_ratio(self):
        for n in (1, 7, 160, 16001):
            sig = AudioSignal(np.zeros(n), 16000)
            out = resample(sig, 44100)
            assert out.n_samples == round(n * 44100 / 16000)

    def test_tone_rms_preserved(self):
        t = np.arange(16000) / 16000.0
        x = 0.3 * np.sin(2 * np.pi * 1000.0 * t)
        out = resample(AudioSignal(x, 16000), PROCESSING_RATE_HZ)
        assert out.sample_rate_hz == PROCESSING_RATE_HZ
        got = rms(out.samples[0, 2000:-2000])
        assert got == pytest.approx(0.3 / np.sqrt(2.0), rel=5e-3)

    def test_near_nyquist_tone_survives_upsampling(self):
        # 7 kHz at a 16 kHz rate is 0.44 of the band; a sloppy anti-alias
        # prototype sags noticeably there.
        t = np.arange(32000) / 16000.0
        x = 0.3 * np.sin(2 * np.pi * 7000.0 * t)
        out = resample(AudioSignal(x, 16000), 44100)
        got = rms(out.samples[0, 4000:-4000])
        ref = 0.3 / np.sqrt(2.0)
        assert 20 * np.log10(got / ref) == pytest.approx(0.0, abs=0.1)

    def test_dc_preserved(self):
        out = resample(AudioSignal(np.full(8000, 0.25), 16000), 44100)
        assert np.mean(out.samples[0, 1000:-1000]) == pytest.approx(0.25, abs=1e-3)

    def test_round_trip_error_small(self, rng):
        x = rng.standard_normal(16000) * 0.1
        # Band-limit below the downsampled Nyquist first.
        spec = np.fft.rfft(x)
        freqs = np.fft.rfftfreq(x.size, 1 / 16000)
        spec[freqs > 6000] = 0.0
        x = np.fft.irfft(spec, n=x.size)
        up = resample(AudioSignal(x, 16000), 44100)
        back = resample(up, 16000)
        err = back.samples[0, 500:-500] - x[500:-500]
        assert 20 * np.log10(rms(err) / rms(x)) < -50.0

    def test_multichannel(self, rng):
        x = rng.standard_normal((2, 4000)) * 0.1
        out = resample(AudioSignal(x, 16000), 8000)
        assert out.samples.shape == (2, 2000)

    @pytest.mark.parametrize("target", [0, -8000, 44100.5])
    def test_bad_target_rejected(self, target):
        with pytest.raises(InvalidArgumentError):
            resample(AudioSignal(np.zeros(10), 16000), target)

    def test_metadata_carried(self):
        sig = AudioSignal(np.zeros(100), 16000, ref_spl_db=94.0)
        assert resample(sig, 8000).ref_spl_db == 94.0


class TestLevels:
    def test_unit_rms_maps_to_reference(self):
        sig = AudioSignal(np.ones(1000), 16000, ref_spl_db=100.0)
        assert level_db_spl(sig) == pytest.approx(100.0)

    def test_tenth_rms_is_twenty_db_down(self):
        sig = AudioSignal(np.full(1000, 0.1), 16000, ref_spl_db=100.0)
        assert level_db_spl(sig) == pytest.approx(80.0)

    def test_custom_reference(self):
        sig = AudioSignal(np.ones(1000), 16000, ref_spl_db=94.0)
        assert level_db_spl(sig) == pytest.approx(94.0)

    def test_silence_hits_floor_not_error(self):
        sig = AudioSignal(np.zeros(100), 16000)
        assert level_db_spl(sig) == SILENCE_FLOOR_DB

    def test_pooled_level_duplicating_channel_is_invariant(self, rng):
        x = rng.standard_normal(1000)
        mono = AudioSignal(x, 16000)
        stereo = AudioSignal(np.stack([x, x]), 16000)
        assert level_db_spl(mono) == pytest.approx(level_db_spl(stereo))

    def test_per_channel_levels(self):
        sig = AudioSignal(np.stack([np.ones(100), np.full(100, 0.1)]), 16000)
        got = channel_levels_db_spl(sig)
        assert got[0] == pytest.approx(100.0)
        assert got[1] == pytest.approx(80.0)

    def test_rms_helper(self):
        assert rms(np.array([3.0, 4.0, 3.0, 4.0])) == pytest.approx(3.5355339)
