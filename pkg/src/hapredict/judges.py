"""ASR judge backends: HTTP endpoint, external command, fixture directory.

Both judges receive byte-identical 16 kHz mono PCM16 WAV payloads built
once per utterance. Transport failures (unreachable endpoint, timeout)
are retried with exponential backoff; application failures (bad status,
nonzero exit, missing fixture) are not, since retrying cannot fix them.
"""
from __future__ import annotations

import subprocess
import tempfile
import threading
import time
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import requests

from .audio import resample, wav_bytes
from .errors import BackendError, ConfigError, InvalidArgumentError, JudgeUnavailableError
from .model import AudioSignal

#: Sample rate (Hz) of the payload every judge receives.
ASR_SAMPLE_RATE_HZ = 16000

JUDGE_IDS = ("small", "large")
BACKEND_KINDS = ("http", "command", "fixture")

RETRY_BASE_DELAY_S = 1.0
RETRY_FACTOR = 2.0

# Module-level so tests can stub out real sleeping.
_sleep = time.sleep


@dataclass(frozen=True)
class Transcript:
    """One judge's transcription of one utterance."""

    text: str
    judge_id: str
    latency_ms: float
    backend_kind: str

    def __post_init__(self):
        if self.judge_id not in JUDGE_IDS:
            raise InvalidArgumentError(f"judge_id must be one of {JUDGE_IDS}, got {self.judge_id!r}")
        if self.backend_kind not in BACKEND_KINDS:
            raise InvalidArgumentError(f"unknown backend kind {self.backend_kind!r}")
        if not isinstance(self.text, str):
            raise InvalidArgumentError("transcript text must be a string")
        if not np.isfinite(self.latency_ms) or self.latency_ms < 0.0:
            raise InvalidArgumentError("latency must be finite and non-negative")


@dataclass(frozen=True)
class JudgeFailure:
    """Why one judge produced no transcript for one utterance."""

    judge_id: str
    kind: str
    message: str


@dataclass(frozen=True)
class JudgeConfig:
    """Where and how to reach one ASR judge."""

    judge_id: str
    backend_kind: str
    endpoint: str = ""
    executable: str = ""
    fixture_dir: str = ""
    model: str = ""
    timeout_s: float = 30.0
    max_retries: int = 2

    def __post_init__(self):
        if self.judge_id not in JUDGE_IDS:
            raise ConfigError(f"judge_id must be one of {JUDGE_IDS}, got {self.judge_id!r}")
        if self.backend_kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {BACKEND_KINDS}, got {self.backend_kind!r}")
        required = {"http": "endpoint", "command": "executable", "fixture": "fixture_dir"}
        field = required[self.backend_kind]
        if not getattr(self, field):
            raise ConfigError(f"judge {self.judge_id!r}: backend {self.backend_kind!r} needs {field!r}")
        if self.timeout_s <= 0.0:
            raise ConfigError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries cannot be negative")


class BackendLimiter:
    """Caps in-flight calls and sustained call rate for one backend.

    Used as a context manager around each backend call. Concurrency is a
    semaphore; rate is a token bucket refilled continuously, holding at
    most one second of burst.
    """

    def __init__(self, max_concurrency: int = 4, rate_per_s: float | None = None):
        if max_concurrency < 1:
            raise InvalidArgumentError("max_concurrency must be at least 1")
        if rate_per_s is not None and rate_per_s <= 0.0:
            raise InvalidArgumentError("rate_per_s must be positive when set")
        self._semaphore = threading.BoundedSemaphore(max_concurrency)
        self._rate = rate_per_s
        self._capacity = max(1.0, rate_per_s) if rate_per_s else 0.0
        self._tokens = self._capacity
        self._last_refill = time.monotonic()
        self._lock = threading.Lock()

    def _take_token(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self._capacity, self._tokens + (now - self._last_refill) * self._rate)
                self._last_refill = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self._rate
            _sleep(wait)

    def __enter__(self):
        self._semaphore.acquire()
        if self._rate:
            try:
                self._take_token()
            except BaseException:
                self._semaphore.release()
                raise
        return self

    def __exit__(self, *exc_info):
        self._semaphore.release()
        return False


def prepare_payload(signal: AudioSignal) -> bytes:
    """The WAV bytes a judge ingests: mono mean, 16 kHz, PCM16."""
    if signal.n_channels > 1:
        signal = AudioSignal(
            signal.samples.mean(axis=0), signal.sample_rate_hz, signal.ref_spl_db
        )
    return wav_bytes(resample(signal, ASR_SAMPLE_RATE_HZ), "pcm16")


def _strip_one_newline(text: str) -> str:
    return text[:-1] if text.endswith("\n") else text


def _http_transcribe(config: JudgeConfig, payload: bytes) -> str:
    attempts = config.max_retries + 1
    for attempt in range(attempts):
        try:
            response = requests.post(
                config.endpoint,
                files={"file": ("audio.wav", payload, "audio/wav")},
                data={"model": config.model} if config.model else {},
                timeout=config.timeout_s,
            )
        except requests.RequestException as exc:
            if attempt + 1 < attempts:
                _sleep(RETRY_BASE_DELAY_S * RETRY_FACTOR**attempt)
                continue
            raise JudgeUnavailableError(config.judge_id, f"transport failure after {attempts} attempts: {exc}")
        if not 200 <= response.status_code < 300:
            raise BackendError(
                f"judge {config.judge_id!r}: HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            body = response.json()
            text = body["text"]
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendError(f"judge {config.judge_id!r}: reply lacks a 'text' field: {exc}") from exc
        if not isinstance(text, str):
            raise BackendError(f"judge {config.judge_id!r}: 'text' field is not a string")
        return text
    raise AssertionError("unreachable")  # pragma: no cover


def _command_transcribe(config: JudgeConfig, payload: bytes) -> str:
    attempts = config.max_retries + 1
    with tempfile.NamedTemporaryFile(suffix=".wav", delete=True) as handle:
        handle.write(payload)
        handle.flush()
        for attempt in range(attempts):
            try:
                completed = subprocess.run(
                    [config.executable, handle.name],
                    capture_output=True,
                    timeout=config.timeout_s,
                )
            except subprocess.TimeoutExpired:
                if attempt + 1 < attempts:
                    _sleep(RETRY_BASE_DELAY_S * RETRY_FACTOR**attempt)
                    continue
                raise JudgeUnavailableError(config.judge_id, f"command timed out {attempts} times")
            except OSError as exc:
                raise BackendError(f"judge {config.judge_id!r}: cannot run {config.executable!r}: {exc}") from exc
            if completed.returncode != 0:
                raise BackendError(
                    f"judge {config.judge_id!r}: exit {completed.returncode}: "
                    f"{completed.stderr.decode('utf-8', 'replace')[:500]}"
                )
            return _strip_one_newline(completed.stdout.decode("utf-8"))
    raise AssertionError("unreachable")  # pragma: no cover


def _fixture_transcribe(config: JudgeConfig, utterance_id: str | None) -> str:
    if not utterance_id:
        raise InvalidArgumentError("fixture judges need an utterance_id to look up their transcript")
    path = Path(config.fixture_dir) / f"{utterance_id}.txt"
    if not path.is_file():
        raise BackendError(f"judge {config.judge_id!r}: no fixture transcript at {path}")
    return _strip_one_newline(path.read_text(encoding="utf-8"))


def _transcribe_payload(config: JudgeConfig, payload: bytes, utterance_id: str | None) -> Transcript:
    start = time.perf_counter()
    if config.backend_kind == "http":
        text = _http_transcribe(config, payload)
    elif config.backend_kind == "command":
        text = _command_transcribe(config, payload)
    else:
        text = _fixture_transcribe(config, utterance_id)
    latency_ms = (time.perf_counter() - start) * 1000.0
    return Transcript(text, config.judge_id, latency_ms, config.backend_kind)


def transcribe(config: JudgeConfig, signal: AudioSignal, utterance_id: str | None = None) -> Transcript:
    """Run one judge on one signal."""
    return _transcribe_payload(config, prepare_payload(signal), utterance_id)


def run_judges(
    small: JudgeConfig,
    large: JudgeConfig,
    signal: AudioSignal,
    utterance_id: str | None = None,
    limiters: Mapping[str, BackendLimiter] | None = None,
) -> tuple[Transcript | JudgeFailure, Transcript | JudgeFailure]:
    """Run both judges on byte-identical payloads; small first.

    A judge that fails yields a JudgeFailure in its slot; the other judge
    still runs. Optional per-judge limiters bound concurrency and rate.
    """
    if small.judge_id != "small" or large.judge_id != "large":
        raise InvalidArgumentError("run_judges expects the small then the large judge config")
    payload = prepare_payload(signal)
    limiters = limiters or {}
    results: list[Transcript | JudgeFailure] = []
    for config in (small, large):
        limiter = limiters.get(config.judge_id) or nullcontext()
        try:
            with limiter:
                results.append(_transcribe_payload(config, payload, utterance_id))
        except (BackendError, JudgeUnavailableError, InvalidArgumentError) as exc:
            results.append(JudgeFailure(config.judge_id, type(exc).__name__, str(exc)))
    return results[0], results[1]
