"""Core domain types: audiograms, listener profiles, audio signals.

An :class:`Audiogram` stores per-ear hearing thresholds in dB HL at a set
of ascending measurement frequencies. Thresholds at unmeasured frequencies
are obtained by linear interpolation on a log-frequency axis, constant
beyond the measured range. :class:`AudioSignal` couples a float waveform
with its sample rate and an SPL calibration reference so the simulation
stages can reason in absolute level.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InsufficientAudiogramError, InvalidArgumentError

#: Severity band edges applied to the mean threshold over the band below.
SEVERITY_MILD_DB = 15.0
SEVERITY_MODERATE_DB = 35.0
SEVERITY_SEVERE_DB = 56.0

#: Frequency band (Hz) whose mean hearing level decides the severity class.
SEVERITY_BAND_HZ = (2000.0, 8000.0)

#: RMS 1.0 (full scale) corresponds to this SPL unless a signal says otherwise.
DEFAULT_REF_SPL_DB = 100.0

_HL_RANGE_DB = (-10.0, 120.0)


class Severity(Enum):
    """Hearing-loss severity class derived from the high-frequency average."""

    NONE = "none"
    MILD = "mild"
    MODERATE = "moderate"
    SEVERE = "severe"


@dataclass(frozen=True)
class Audiogram:
    """Hearing thresholds (dB HL) of one ear at ascending frequencies (Hz).

    Instances are immutable and hashable, so derived artifacts such as
    prescriptions and FIR filters can be memoized per audiogram.
    """

    frequencies_hz: tuple[float, ...]
    levels_db_hl: tuple[float, ...]

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies_hz)
        levels = tuple(float(l) for l in self.levels_db_hl)
        object.__setattr__(self, "frequencies_hz", freqs)
        object.__setattr__(self, "levels_db_hl", levels)
        if len(freqs) != len(levels):
            raise InvalidArgumentError(
                "frequencies and levels must have the same length, got "
                f"{len(freqs)} and {len(levels)}"
            )
        if len(freqs) < 2:
            raise InvalidArgumentError("an audiogram needs at least two measured frequencies")
        if any(not np.isfinite(f) or f <= 0.0 for f in freqs):
            raise InvalidArgumentError("audiogram frequencies must be finite and positive")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise InvalidArgumentError("audiogram frequencies must be strictly ascending")
        lo, hi = _HL_RANGE_DB
        if any(not np.isfinite(l) or l < lo or l > hi for l in levels):
            raise InvalidArgumentError(f"hearing levels must be finite and within [{lo}, {hi}] dB HL")

    @classmethod
    def flat(
        cls,
        level_db_hl: float,
        frequencies_hz: tuple[float, ...] = (250.0, 500.0, 1000.0, 2000.0, 4000.0, 6000.0, 8000.0),
    ) -> "Audiogram":
        """Audiogram with the same threshold at every measurement frequency."""
        return cls(tuple(frequencies_hz), tuple(float(level_db_hl) for _ in frequencies_hz))


def interpolate_hl(audiogram: Audiogram, frequencies_hz) -> float | np.ndarray:
    """Hearing level (dB HL) at arbitrary frequencies.

    Linear interpolation on a log-frequency axis between measured points;
    constant extension below the lowest and above the highest measurement.
    Accepts a scalar or an array; returns matching shape.
    """
    f = np.asarray(frequencies_hz, dtype=np.float64)
    if not np.all(np.isfinite(f)) or np.any(f <= 0.0):
        raise InvalidArgumentError("query frequencies must be finite and positive")
    out = np.interp(
        np.log(f),
        np.log(np.asarray(audiogram.frequencies_hz)),
        np.asarray(audiogram.levels_db_hl),
    )
    if np.isscalar(frequencies_hz) or getattr(frequencies_hz, "ndim", 1) == 0:
        return float(out)
    return out


def classify_severity(audiogram: Audiogram) -> Severity:
    """Severity class from the mean measured threshold in the 2-8 kHz band.

    Band edges are inclusive. Raises InsufficientAudiogramError when the
    audiogram has no measured frequency inside the band.
    """
    lo, hi = SEVERITY_BAND_HZ
    levels = [
        l for f, l in zip(audiogram.frequencies_hz, audiogram.levels_db_hl) if lo <= f <= hi
    ]
    if not levels:
        raise InsufficientAudiogramError(
            f"no measured frequencies within [{lo:g}, {hi:g}] Hz to classify severity"
        )
    mean_hl = float(np.mean(levels))
    if mean_hl < SEVERITY_MILD_DB:
        return Severity.NONE
    if mean_hl < SEVERITY_MODERATE_DB:
        return Severity.MILD
    if mean_hl <= SEVERITY_SEVERE_DB:
        return Severity.MODERATE
    return Severity.SEVERE


@dataclass(frozen=True)
class ListenerProfile:
    """A listener's identity plus left and right ear audiograms."""

    listener_id: str
    left: Audiogram
    right: Audiogram

    def __post_init__(self):
        if not isinstance(self.listener_id, str) or not self.listener_id:
            raise InvalidArgumentError("listener_id must be a non-empty string")


@dataclass(frozen=True)
class AudioSignal:
    """A sampled waveform with SPL calibration.

    ``samples`` is a read-only float64 array of shape (channels, samples)
    in full-scale units (+-1.0). ``ref_spl_db`` is the SPL that an RMS of
    1.0 represents, which lets processing stages convert between digital
    amplitude and absolute level.
    """

    samples: np.ndarray
    sample_rate_hz: int
    ref_spl_db: float = DEFAULT_REF_SPL_DB

    def __post_init__(self):
        try:
            # always copy: a view would let the caller mutate the signal
            arr = np.array(self.samples, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"samples are not numeric: {exc}") from exc
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise InvalidArgumentError(f"samples must be 1-D or (channels, samples), got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("samples must be finite")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        rate = self.sample_rate_hz
        if not float(rate).is_integer() or int(rate) <= 0:
            raise InvalidArgumentError(f"sample rate must be a positive integer, got {rate!r}")
        object.__setattr__(self, "sample_rate_hz", int(rate))
        if not np.isfinite(self.ref_spl_db):
            raise InvalidArgumentError("ref_spl_db must be finite")
        object.__setattr__(self, "ref_spl_db", float(self.ref_spl_db))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def channel(self, index: int) -> np.ndarray:
        """One channel as a read-only 1-D view."""
        return self.samples[index]

    def with_samples(self, samples) -> "AudioSignal":
        """New signal with the same rate and calibration, different samples."""
        return AudioSignal(samples, self.sample_rate_hz, self.ref_spl_db)


def require_mono(signal: AudioSignal, operation: str) -> np.ndarray:
    """The single channel of a mono signal, or InvalidArgumentError."""
    if signal.n_channels != 1:
        raise InvalidArgumentError(
            f"{operation} expects a mono signal, got {signal.n_channels} channels"
        )
    return signal.channel(0)
