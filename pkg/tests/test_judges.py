"""ASR judge backends, payload preparation, retries, and rate limiting."""

from __future__ import annotations

import io
import stat
import threading
import time

import numpy as np
import pytest
from scipy.io import wavfile

import hapredict.judges as judges_module
from hapredict.errors import (
    BackendError,
    ConfigError,
    InvalidArgumentError,
    JudgeUnavailableError,
)
from hapredict.judges import (
    ASR_SAMPLE_RATE_HZ,
    BackendLimiter,
    JudgeConfig,
    JudgeFailure,
    Transcript,
    prepare_payload,
    run_judges,
    transcribe,
)
from hapredict.model import AudioSignal


def tone_signal(rate: int = 44100, seconds: float = 0.3) -> AudioSignal:
    t = np.arange(int(rate * seconds)) / rate
    return AudioSignal(0.1 * np.sin(2 * np.pi * 440.0 * t), rate)


def fixture_config(judge_id: str, directory) -> JudgeConfig:
    return JudgeConfig(judge_id, "fixture", fixture_dir=str(directory))


class TestTranscriptValidation:
    def test_valid(self):
        t = Transcript("hello", "small", 12.5, "http")
        assert t.text == "hello"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"judge_id": "medium"},
            {"backend_kind": "carrier-pigeon"},
            {"latency_ms": -1.0},
            {"text": 42},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        base = dict(text="x", judge_id="small", latency_ms=0.0, backend_kind="http")
        base.update(kwargs)
        with pytest.raises(InvalidArgumentError):
            Transcript(**base)


class TestJudgeConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"judge_id": "tiny", "backend_kind": "fixture", "fixture_dir": "/x"},
            {"judge_id": "small", "backend_kind": "grpc"},
            {"judge_id": "small", "backend_kind": "http"},  # no endpoint
            {"judge_id": "small", "backend_kind": "command"},  # no executable
            {"judge_id": "small", "backend_kind": "fixture"},  # no dir
            {
                "judge_id": "small",
                "backend_kind": "fixture",
                "fixture_dir": "/x",
                "timeout_s": 0.0,
            },
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            JudgeConfig(**kwargs)


class TestPreparePayload:
    def test_payload_is_16k_mono_pcm16(self):
        payload = prepare_payload(tone_signal())
        rate, data = wavfile.read(io.BytesIO(payload))
        assert rate == ASR_SAMPLE_RATE_HZ
        assert data.dtype == np.int16
        assert data.ndim == 1

    def test_stereo_downmixed_before_resampling(self):
        x = np.stack([np.full(4410, 0.5), np.full(4410, -0.5)])
        payload = prepare_payload(AudioSignal(x, 44100))
        _, data = wavfile.read(io.BytesIO(payload))
        assert np.max(np.abs(data)) <= 200  # cancels to near-silence

    def test_payload_already_at_asr_rate_passes_through(self):
        sig = tone_signal(rate=ASR_SAMPLE_RATE_HZ)
        payload = prepare_payload(sig)
        rate, data = wavfile.read(io.BytesIO(payload))
        assert rate == ASR_SAMPLE_RATE_HZ
        assert data.size == sig.n_samples


class TestFixtureBackend:
    def test_reads_matching_transcript(self, tmp_path):
        (tmp_path / "utt_1.txt").write_text("the text\n", encoding="utf-8")
        got = transcribe(fixture_config("small", tmp_path), tone_signal(), "utt_1")
        assert got.text == "the text"
        assert got.judge_id == "small"
        assert got.backend_kind == "fixture"

    def test_only_one_trailing_newline_stripped(self, tmp_path):
        (tmp_path / "utt_1.txt").write_text("line\n\n", encoding="utf-8")
        got = transcribe(fixture_config("small", tmp_path), tone_signal(), "utt_1")
        assert got.text == "line\n"

    def test_empty_transcript_file_means_silence(self, tmp_path):
        (tmp_path / "utt_1.txt").write_text("\n", encoding="utf-8")
        got = transcribe(fixture_config("small", tmp_path), tone_signal(), "utt_1")
        assert got.text == ""

    def test_missing_transcript_is_backend_error(self, tmp_path):
        with pytest.raises(BackendError):
            transcribe(fixture_config("small", tmp_path), tone_signal(), "utt_none")

    def test_missing_utterance_id_rejected(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            transcribe(fixture_config("small", tmp_path), tone_signal())


class TestCommandBackend:
    def make_script(self, tmp_path, body: str) -> str:
        script = tmp_path / "asr.sh"
        script.write_text("#!/bin/sh\n" + body, encoding="utf-8")
        script.chmod(script.stat().st_mode | stat.S_IXUSR)
        return str(script)

    def test_stdout_is_the_transcript(self, tmp_path):
        exe = self.make_script(tmp_path, 'echo "transcribed words"\n')
        config = JudgeConfig("small", "command", executable=exe)
        got = transcribe(config, tone_signal())
        assert got.text == "transcribed words"
        assert got.backend_kind == "command"

    def test_command_receives_a_readable_wav_path(self, tmp_path):
        marker = tmp_path / "seen.wav"
        exe = self.make_script(tmp_path, f'cp "$1" "{marker}"\necho ok\n')
        config = JudgeConfig("small", "command", executable=exe)
        transcribe(config, tone_signal())
        rate, data = wavfile.read(marker)
        assert rate == ASR_SAMPLE_RATE_HZ
        assert data.dtype == np.int16

    def test_nonzero_exit_is_backend_error_with_stderr(self, tmp_path):
        exe = self.make_script(tmp_path, 'echo "model exploded" >&2\nexit 3\n')
        config = JudgeConfig("small", "command", executable=exe)
        with pytest.raises(BackendError, match="model exploded"):
            transcribe(config, tone_signal())

    def test_missing_executable_is_backend_error(self, tmp_path):
        config = JudgeConfig("small", "command", executable=str(tmp_path / "gone"))
        with pytest.raises(BackendError):
            transcribe(config, tone_signal())


class TestHttpBackend:
    def test_multipart_round_trip(self, http_server):
        url, seen = http_server(lambda n, path, body: (200, {"text": "heard you"}))
        config = JudgeConfig("large", "http", endpoint=url, model="asr-large-v2")
        got = transcribe(config, tone_signal())
        assert got.text == "heard you"
        assert got.judge_id == "large"
        body = seen[0]["body"]
        assert b"audio.wav" in body
        assert b"asr-large-v2" in body
        assert b"RIFF" in body  # the wav payload itself

    def test_error_status_is_backend_error_not_retried(self, http_server):
        url, seen = http_server(lambda n, path, body: (500, {"detail": "boom"}))
        config = JudgeConfig("small", "http", endpoint=url, max_retries=3)
        with pytest.raises(BackendError):
            transcribe(config, tone_signal())
        assert len(seen) == 1

    def test_reply_without_text_field_rejected(self, http_server):
        url, _ = http_server(lambda n, path, body: (200, {"transcript": "x"}))
        config = JudgeConfig("small", "http", endpoint=url)
        with pytest.raises(BackendError):
            transcribe(config, tone_signal())

    def test_non_string_text_rejected(self, http_server):
        url, _ = http_server(lambda n, path, body: (200, {"text": 17}))
        config = JudgeConfig("small", "http", endpoint=url)
        with pytest.raises(BackendError):
            transcribe(config, tone_signal())

    def test_unreachable_endpoint_retries_then_unavailable(self, monkeypatch):
        delays = []
        monkeypatch.setattr(judges_module, "_sleep", delays.append)
        config = JudgeConfig(
            "small", "http", endpoint="http://127.0.0.1:1/asr", max_retries=2
        )
        with pytest.raises(JudgeUnavailableError) as excinfo:
            transcribe(config, tone_signal())
        assert delays == [1.0, 2.0]
        assert excinfo.value.judge_id == "small"


class TestRunJudges:
    def test_both_judges_get_byte_identical_payloads(self, http_server):
        url, seen = http_server(lambda n, path, body: (200, {"text": "same"}))
        small = JudgeConfig("small", "http", endpoint=url, model="s")
        large = JudgeConfig("large", "http", endpoint=url, model="l")
        run_judges(small, large, tone_signal())
        assert len(seen) == 2

        def wav_part(body: bytes) -> bytes:
            start = body.index(b"RIFF")
            return body[start : body.index(b"\r\n", start)]

        assert wav_part(seen[0]["body"]) == wav_part(seen[1]["body"])

    def test_results_ordered_small_then_large(self, tmp_path):
        small_dir = tmp_path / "s"
        large_dir = tmp_path / "l"
        small_dir.mkdir()
        large_dir.mkdir()
        (small_dir / "u.txt").write_text("from small\n")
        (large_dir / "u.txt").write_text("from large\n")
        got_small, got_large = run_judges(
            fixture_config("small", small_dir),
            fixture_config("large", large_dir),
            tone_signal(),
            "u",
        )
        assert got_small.text == "from small"
        assert got_large.text == "from large"

    def test_one_failed_judge_does_not_stop_the_other(self, tmp_path):
        small_dir = tmp_path / "s"
        small_dir.mkdir()  # deliberately empty: small will fail
        large_dir = tmp_path / "l"
        large_dir.mkdir()
        (large_dir / "u.txt").write_text("still here\n")
        got_small, got_large = run_judges(
            fixture_config("small", small_dir),
            fixture_config("large", large_dir),
            tone_signal(),
            "u",
        )
        assert isinstance(got_small, JudgeFailure)
        assert got_small.judge_id == "small"
        assert got_small.kind == "BackendError"
        assert isinstance(got_large, Transcript)

    def test_swapped_configs_rejected(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            run_judges(
                fixture_config("large", tmp_path),
                fixture_config("small", tmp_path),
                tone_signal(),
            )


class TestBackendLimiter:
    def test_concurrency_is_capped(self):
        limiter = BackendLimiter(max_concurrency=3)
        in_flight = 0
        peak = 0
        lock = threading.Lock()

        def work():
            nonlocal in_flight, peak
            with limiter:
                with lock:
                    in_flight += 1
                    peak = max(peak, in_flight)
                time.sleep(0.02)
                with lock:
                    in_flight -= 1

        threads = [threading.Thread(target=work) for _ in range(12)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert peak <= 3

    def test_rate_limit_spaces_calls_out(self):
        limiter = BackendLimiter(max_concurrency=4, rate_per_s=50.0)
        start = time.monotonic()
        for _ in range(55):
            with limiter:
                pass
        elapsed = time.monotonic() - start
        # 50 tokens of burst, then ~5 more at 50/s.
        assert elapsed >= 0.08

    def test_no_rate_limit_is_fast(self):
        limiter = BackendLimiter(max_concurrency=4)
        start = time.monotonic()
        for _ in range(1000):
            with limiter:
                pass
        assert time.monotonic() - start < 0.5

    @pytest.mark.parametrize("kwargs", [{"max_concurrency": 0}, {"rate_per_s": 0.0}])
    def test_invalid_limits_rejected(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            BackendLimiter(**kwargs)
