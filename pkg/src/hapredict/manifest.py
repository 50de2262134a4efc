"""Loading of dataset manifests and listener audiogram files.

A manifest is a JSON array of utterance records; a listener file is a
JSON object keyed by listener id. Field names follow the common corpus
layout (signal / listener / system, audiogram_cfs / audiogram_levels_l /
audiogram_levels_r) with longer synonyms accepted.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError
from .model import Audiogram, ListenerProfile


@dataclass(frozen=True)
class ManifestRecord:
    """One utterance to assess: audio path, listener, source system, label."""

    utterance_id: str
    signal_path: Path
    listener_id: str
    system_id: str
    correctness: float | None


def _field(entry: dict, names: tuple[str, ...], where: str, required: bool = True):
    for name in names:
        if name in entry:
            return entry[name]
    if required:
        raise FormatError(f"{where}: missing field {names[0]!r}")
    return None


def load_manifest(path, audio_dir=None) -> list[ManifestRecord]:
    """Parse a manifest file; audio paths resolve against audio_dir.

    audio_dir defaults to the manifest's own directory. Records may name
    their WAV file explicitly with "path"; otherwise it is
    <audio_dir>/<utterance_id>.wav. Correctness labels, when present,
    must be numbers in [0, 100]. Duplicate utterance ids are rejected.
    """
    path = Path(path)
    base = Path(audio_dir) if audio_dir is not None else path.parent
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: manifest is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise FormatError(f"{path}: manifest must be a JSON array of records")
    records: list[ManifestRecord] = []
    seen: set[str] = set()
    for index, entry in enumerate(entries):
        where = f"{path}: record {index}"
        if not isinstance(entry, dict):
            raise FormatError(f"{where}: must be a JSON object")
        utterance_id = _field(entry, ("signal", "utterance_id"), where)
        if not isinstance(utterance_id, str) or not utterance_id:
            raise FormatError(f"{where}: utterance id must be a non-empty string")
        if utterance_id in seen:
            raise FormatError(f"{where}: duplicate utterance id {utterance_id!r}")
        seen.add(utterance_id)
        listener_id = _field(entry, ("listener", "listener_id"), where)
        system_id = _field(entry, ("system", "system_id"), where)
        for name, value in (("listener", listener_id), ("system", system_id)):
            if not isinstance(value, str) or not value:
                raise FormatError(f"{where}: {name} must be a non-empty string")
        correctness = _field(entry, ("correctness",), where, required=False)
        if correctness is not None:
            if isinstance(correctness, bool) or not isinstance(correctness, (int, float)):
                raise FormatError(f"{where}: correctness must be a number")
            correctness = float(correctness)
            if not 0.0 <= correctness <= 100.0:
                raise FormatError(f"{where}: correctness {correctness} outside [0, 100]")
        explicit = entry.get("path")
        if explicit is not None:
            signal_path = Path(explicit)
            if not signal_path.is_absolute():
                signal_path = base / signal_path
        else:
            signal_path = base / f"{utterance_id}.wav"
        records.append(ManifestRecord(utterance_id, signal_path, listener_id, system_id, correctness))
    return records


def load_listeners(path) -> dict[str, ListenerProfile]:
    """Parse a listener file into profiles keyed by listener id.

    Each entry needs audiogram_cfs plus audiogram_levels_l and
    audiogram_levels_r of the same length; extra fields are ignored.
    """
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: listener file is not valid JSON: {exc}") from exc
    if not isinstance(entries, dict):
        raise FormatError(f"{path}: listener file must be a JSON object keyed by listener id")
    profiles: dict[str, ListenerProfile] = {}
    for listener_id, entry in entries.items():
        where = f"{path}: listener {listener_id!r}"
        if not isinstance(entry, dict):
            raise FormatError(f"{where}: must be a JSON object")
        freqs = _field(entry, ("audiogram_cfs", "frequencies_hz"), where)
        left = _field(entry, ("audiogram_levels_l", "levels_left"), where)
        right = _field(entry, ("audiogram_levels_r", "levels_right"), where)
        for name, values in (("audiogram_cfs", freqs), ("audiogram_levels_l", left), ("audiogram_levels_r", right)):
            if not isinstance(values, list) or not values:
                raise FormatError(f"{where}: {name} must be a non-empty array")
        try:
            profiles[listener_id] = ListenerProfile(
                listener_id,
                left=Audiogram(tuple(freqs), tuple(left)),
                right=Audiogram(tuple(freqs), tuple(right)),
            )
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{where}: {exc}") from exc
    return profiles
