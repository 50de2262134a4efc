"""Run configuration: TOML file plus command-line overrides."""
from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError
from .judges import JudgeConfig
from .model import DEFAULT_REF_SPL_DB
from .scorer import PromptTemplate, ScorerConfig

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib


@dataclass(frozen=True)
class JudgesSettings:
    """Shared transport limits applied to each judge backend."""

    max_concurrency: int = 4
    rate_per_s: float | None = None


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs besides the manifest and listeners."""

    judge_small: JudgeConfig
    judge_large: JudgeConfig
    scorer: ScorerConfig = ScorerConfig()
    prompt: PromptTemplate = PromptTemplate()
    judges: JudgesSettings = JudgesSettings()
    ref_spl_db: float = DEFAULT_REF_SPL_DB
    better_ear: bool = False
    judge_weights: tuple[float, float] = (0.5, 0.5)
    audio_dir: Path | None = None


_TOP_LEVEL_KEYS = {"ref_spl_db", "better_ear", "judge_weights", "audio_dir", "judge", "judges", "scorer"}
_JUDGE_KEYS = {"kind", "endpoint", "executable", "fixture_dir", "model", "timeout_s", "max_retries"}
_JUDGES_KEYS = {"max_concurrency", "rate_per_s"}
_SCORER_KEYS = {
    "kind",
    "endpoint",
    "model",
    "api_key_env",
    "prompt_file",
    "timeout_s",
    "max_retries",
    "max_concurrency",
    "rate_per_s",
}


def _reject_unknown(table: dict, allowed: set[str], where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _judge_config(judge_id: str, table: dict, where: str) -> JudgeConfig:
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: must be a table")
    _reject_unknown(table, _JUDGE_KEYS, where)
    if "kind" not in table:
        raise ConfigError(f"{where}: missing 'kind'")
    try:
        return JudgeConfig(judge_id=judge_id, backend_kind=str(table["kind"]), **{
            k: table[k] for k in table if k != "kind"
        })
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path, base_dir=None) -> RunConfig:
    """Parse a TOML run configuration.

    Unknown keys are rejected rather than ignored, so typos surface as
    configuration errors instead of silently applied defaults. Relative
    paths inside the file resolve against the file's own directory
    (or base_dir when given).
    """
    path = Path(path)
    base = Path(base_dir) if base_dir is not None else path.parent
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: not valid TOML: {exc}") from exc
    _reject_unknown(raw, _TOP_LEVEL_KEYS, str(path))

    judge_tables = raw.get("judge")
    if not isinstance(judge_tables, dict) or set(judge_tables) != {"small", "large"}:
        raise ConfigError(f"{path}: config needs [judge.small] and [judge.large] tables")
    small = _judge_config("small", judge_tables["small"], f"{path}: [judge.small]")
    large = _judge_config("large", judge_tables["large"], f"{path}: [judge.large]")
    small, large = (_resolve_judge_paths(j, base) for j in (small, large))

    judges_table = raw.get("judges", {})
    _reject_unknown(judges_table, _JUDGES_KEYS, f"{path}: [judges]")
    judges = JudgesSettings(
        max_concurrency=int(judges_table.get("max_concurrency", 4)),
        rate_per_s=judges_table.get("rate_per_s"),
    )

    scorer_table = dict(raw.get("scorer", {}))
    _reject_unknown(scorer_table, _SCORER_KEYS, f"{path}: [scorer]")
    prompt_file = scorer_table.pop("prompt_file", None)
    prompt = PromptTemplate.from_file(_resolve(prompt_file, base)) if prompt_file else PromptTemplate()
    try:
        scorer = ScorerConfig(**scorer_table)
    except TypeError as exc:
        raise ConfigError(f"{path}: [scorer]: {exc}") from exc

    weights = raw.get("judge_weights", [0.5, 0.5])
    if (
        not isinstance(weights, list)
        or len(weights) != 2
        or any(isinstance(w, bool) or not isinstance(w, (int, float)) for w in weights)
    ):
        raise ConfigError(f"{path}: judge_weights must be a two-number array")
    ref_spl = raw.get("ref_spl_db", DEFAULT_REF_SPL_DB)
    if isinstance(ref_spl, bool) or not isinstance(ref_spl, (int, float)):
        raise ConfigError(f"{path}: ref_spl_db must be a number")
    better_ear = raw.get("better_ear", False)
    if not isinstance(better_ear, bool):
        raise ConfigError(f"{path}: better_ear must be a boolean")
    audio_dir = raw.get("audio_dir")

    return RunConfig(
        judge_small=small,
        judge_large=large,
        scorer=scorer,
        prompt=prompt,
        judges=judges,
        ref_spl_db=float(ref_spl),
        better_ear=better_ear,
        judge_weights=(float(weights[0]), float(weights[1])),
        audio_dir=_resolve(audio_dir, base) if audio_dir is not None else None,
    )


def _resolve(value, base: Path) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _resolve_judge_paths(judge: JudgeConfig, base: Path) -> JudgeConfig:
    updates = {}
    if judge.fixture_dir:
        updates["fixture_dir"] = str(_resolve(judge.fixture_dir, base))
    if judge.executable and "/" in judge.executable:
        updates["executable"] = str(_resolve(judge.executable, base))
    return replace(judge, **updates) if updates else judge
