"""Transcript naturalness scoring through a chat-completions backend.

Each transcript is rated 0 to 100 by a language model asked to reply in
strict JSON. Replies are parsed leniently (JSON first, then the first
number in the text) and the resulting score is clamped into range. An
unparsable reply triggers exactly one re-ask before the transcript is
declared unscorable. Scores are cached on disk keyed by model, prompt,
and transcript text, so re-running a finished batch makes no backend
calls at all.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import (
    BackendError,
    ConfigError,
    InvalidArgumentError,
    ScorerUnavailableError,
    ScoringFailedError,
    UnparsableReplyError,
)
from .judges import BackendLimiter, Transcript

PLACEHOLDER = "{transcript}"

DEFAULT_SYSTEM_TEXT = "You are a careful evaluator of automatic speech transcripts."
DEFAULT_USER_TEMPLATE = (
    "Rate the naturalness of the transcript below on a scale from 0 to 100, "
    "where naturalness means how close the text is to fluent, coherent, "
    "contextually plausible human speech.\n\nTranscript: \"{transcript}\""
)
DEFAULT_RESPONSE_FORMAT = 'Reply strictly as JSON: {"score": <integer>}'

RETRY_BASE_DELAY_S = 1.0
RETRY_FACTOR = 2.0

_sleep = time.sleep

_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?")


@dataclass(frozen=True)
class PromptTemplate:
    """The three prompt parts sent per transcript.

    user_template must contain the {transcript} placeholder exactly once;
    response_format is appended to the user message on its own line.
    """

    system_text: str = DEFAULT_SYSTEM_TEXT
    user_template: str = DEFAULT_USER_TEMPLATE
    response_format: str = DEFAULT_RESPONSE_FORMAT

    def __post_init__(self):
        count = self.user_template.count(PLACEHOLDER)
        if count != 1:
            raise ConfigError(
                f"user_template must contain {PLACEHOLDER} exactly once, found {count} occurrences"
            )

    @classmethod
    def from_file(cls, path) -> "PromptTemplate":
        """Load overrides from a JSON file; missing keys keep defaults."""
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: prompt file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: prompt file must hold a JSON object")
        known = {"system_text", "user_template", "response_format"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"{path}: unknown prompt keys {sorted(unknown)}")
        return cls(**{k: str(v) for k, v in raw.items()})

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for part in (self.system_text, self.user_template, self.response_format):
            digest.update(part.encode("utf-8"))
            digest.update(b"\x00")
        return digest.hexdigest()


def build_prompt(template: PromptTemplate, transcript_text: str) -> str:
    """The user message for one transcript.

    The transcript is substituted in a single pass, so braces inside it
    are never re-interpreted as template syntax.
    """
    before, _, after = template.user_template.partition(PLACEHOLDER)
    return f"{before}{transcript_text}{after}\n{template.response_format}"


def parse_score(raw_reply: str) -> float:
    """Score from a backend reply, clamped into [0, 100].

    Tries strict JSON with a numeric "score" member first, then falls
    back to the first number anywhere in the text. Raises
    UnparsableReplyError when neither route yields a number.
    """
    value = None
    try:
        parsed = json.loads(raw_reply)
    except ValueError:
        parsed = None
    if isinstance(parsed, dict):
        candidate = parsed.get("score")
        if isinstance(candidate, (int, float)) and not isinstance(candidate, bool) and not math.isnan(candidate):
            value = float(candidate)
    if value is None:
        match = _NUMBER_RE.search(raw_reply)
        if match is None:
            raise UnparsableReplyError(f"no number found in reply: {raw_reply[:200]!r}")
        value = float(match.group())
        if math.isnan(value):  # pragma: no cover - the pattern cannot produce NaN
            raise UnparsableReplyError("reply parsed to NaN")
    return min(max(value, 0.0), 100.0)


@dataclass(frozen=True)
class ScorerConfig:
    """Backend selection and transport settings for the scorer."""

    kind: str = "stub"
    endpoint: str = ""
    model: str = ""
    api_key_env: str = ""
    timeout_s: float = 60.0
    max_retries: int = 2
    max_concurrency: int = 2
    rate_per_s: float | None = None

    def __post_init__(self):
        if self.kind not in ("http", "stub"):
            raise ConfigError(f"scorer kind must be 'http' or 'stub', got {self.kind!r}")
        if self.kind == "http":
            if not self.endpoint:
                raise ConfigError("scorer kind 'http' needs an endpoint")
            if not self.model:
                raise ConfigError("scorer kind 'http' needs a model name")
        if self.timeout_s <= 0.0:
            raise ConfigError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries cannot be negative")


@dataclass(frozen=True)
class JudgeScore:
    """One judge transcript's naturalness score."""

    value: float
    judge_id: str
    raw_reply: str
    cached: bool

    def __post_init__(self):
        if not math.isfinite(self.value) or not 0.0 <= self.value <= 100.0:
            raise InvalidArgumentError(f"score must be within [0, 100], got {self.value!r}")


class _HttpBackend:
    """Chat-completions endpoint at temperature 0."""

    def __init__(self, config: ScorerConfig):
        self._config = config

    def complete(self, system_text: str, user_text: str, transcript_text: str) -> str:
        config = self._config
        headers = {}
        if config.api_key_env:
            key = os.environ.get(config.api_key_env, "")
            if not key:
                raise ConfigError(f"environment variable {config.api_key_env!r} is not set")
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
        }
        attempts = config.max_retries + 1
        for attempt in range(attempts):
            try:
                response = requests.post(
                    config.endpoint, json=body, headers=headers, timeout=config.timeout_s
                )
            except requests.RequestException as exc:
                if attempt + 1 < attempts:
                    _sleep(RETRY_BASE_DELAY_S * RETRY_FACTOR**attempt)
                    continue
                raise ScorerUnavailableError(f"transport failure after {attempts} attempts: {exc}")
            if not 200 <= response.status_code < 300:
                raise BackendError(f"scorer: HTTP {response.status_code}: {response.text[:200]}")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"scorer: malformed completion payload: {exc}") from exc
        raise AssertionError("unreachable")  # pragma: no cover


class _StubBackend:
    """Deterministic offline scorer: 10 points per transcript character.

    Exists for tests and dry validation runs; the mapping is arbitrary
    but stable, monotone in length, and saturates at 100.
    """

    def complete(self, system_text: str, user_text: str, transcript_text: str) -> str:
        return json.dumps({"score": min(100, 10 * len(transcript_text))})


class ScoreClient:
    """Scores transcripts with caching, a one-shot re-ask, and rate limits.

    Thread-safe: the disk cache is written atomically and an in-memory
    map absorbs duplicate transcripts within a run.
    """

    def __init__(
        self,
        config: ScorerConfig,
        template: PromptTemplate | None = None,
        cache_dir=None,
    ):
        self.config = config
        self.template = template or PromptTemplate()
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._backend = _HttpBackend(config) if config.kind == "http" else _StubBackend()
        self._limiter = BackendLimiter(config.max_concurrency, config.rate_per_s)
        self._memory: dict[str, tuple[float, str]] = {}
        self._lock = threading.Lock()
        self._backend_calls = 0

    @property
    def backend_calls(self) -> int:
        """How many times the backend was actually invoked."""
        with self._lock:
            return self._backend_calls

    def cache_key(self, transcript_text: str) -> str:
        """Cache key over model, prompt, and transcript; judge-agnostic.

        The same text spoken to both judges scores once.
        """
        digest = hashlib.sha256()
        digest.update(self.config.model.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(self.template.fingerprint().encode("utf-8"))
        digest.update(b"\x00")
        digest.update(transcript_text.encode("utf-8"))
        return digest.hexdigest()

    def _cache_path(self, key: str) -> Path | None:
        return self.cache_dir / f"{key}.json" if self.cache_dir is not None else None

    def _load_cached(self, key: str) -> tuple[float, str] | None:
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        path = self._cache_path(key)
        if path is None or not path.is_file():
            return None
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            value = float(entry["score"])
            raw = str(entry.get("raw_reply", ""))
        except (ValueError, KeyError, TypeError):
            return None  # corrupt entry: treat as a miss and rescore
        if not 0.0 <= value <= 100.0:
            return None
        with self._lock:
            self._memory[key] = (value, raw)
        return value, raw

    def _store(self, key: str, value: float, raw: str) -> None:
        with self._lock:
            self._memory[key] = (value, raw)
        path = self._cache_path(key)
        if path is None:
            return
        payload = json.dumps(
            {"score": value, "raw_reply": raw, "model": self.config.model, "created_unix": int(time.time())},
            sort_keys=True,
        )
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(payload)
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise

    def _ask(self, transcript: Transcript) -> str:
        user_text = build_prompt(self.template, transcript.text)
        with self._lock:
            self._backend_calls += 1
        with self._limiter:
            return self._backend.complete(self.template.system_text, user_text, transcript.text)

    def score_transcript(self, transcript: Transcript) -> JudgeScore:
        """Score one transcript, consulting the cache first.

        On an unparsable reply the backend is asked once more; a second
        unparsable reply raises ScoringFailedError.
        """
        key = self.cache_key(transcript.text)
        cached = self._load_cached(key)
        if cached is not None:
            return JudgeScore(cached[0], transcript.judge_id, cached[1], cached=True)
        raw = self._ask(transcript)
        try:
            value = parse_score(raw)
        except UnparsableReplyError:
            raw = self._ask(transcript)
            try:
                value = parse_score(raw)
            except UnparsableReplyError as exc:
                raise ScoringFailedError(
                    f"unparsable scorer replies for judge {transcript.judge_id!r}: {raw[:200]!r}"
                ) from exc
        self._store(key, value, raw)
        return JudgeScore(value, transcript.judge_id, raw, cached=False)
