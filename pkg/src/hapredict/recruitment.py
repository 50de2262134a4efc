"""Loudness recruitment: multi-band envelope expansion toward a catch level.

The signal is split into overlapping auditory bands by a bank of
fourth-order gammatone magnitude responses applied in the frequency
domain to the analytic signal. Within each band the envelope is expanded
so that sounds at the band's hearing threshold become inaudible while
sounds at the catch level (where recruiting ears meet normal loudness)
keep their level. Band signals weighted by the synthesis partition sum
back to the input exactly, so a zero-loss audiogram reproduces the
waveform to numerical precision.

Two sets of band filters are used on purpose. Synthesis weights form a
partition of unity (their sum is 1 at every frequency), which makes
reconstruction exact but gives each band a peak response well below 1
where neighbours overlap. Level estimation instead uses flat-topped
filters, the same gammatone skirts clipped at a small knee, so a tone at
a band's centre is measured at its true acoustic level rather than at
the partition's attenuated one. Without this split, expansion gains near
the catch level would be systematically wrong by several dB.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import fft, fftfreq, ifft, next_fast_len
from scipy.signal import butter, sosfiltfilt

from .errors import InvalidArgumentError
from .model import Audiogram, AudioSignal, interpolate_hl, require_mono
from .smearing import erb_hz

log = logging.getLogger(__name__)

#: Envelope smoothing cutoff (Hz); zero-phase second-order Butterworth.
ENV_LOWPASS_HZ = 40.0

#: Hearing losses above this are clamped before computing expansion ratios.
MAX_EXPANSION_HL_DB = 80.0

#: Level-estimation filters are the band response clipped at this knee,
#: giving them a flat top of width comparable to the band's ERB.
LEVEL_FILTER_KNEE = 0.15

#: Zero padding (samples) on both edges to absorb filter transients.
_EDGE_PAD = 8192

# Peak-to-ERB factor of a 4th-order gammatone magnitude response:
# bandwidth parameter b = ERB / A with A = pi * 6! * 2^-6 / (3!)^2.
_A_GAMMA = math.pi * math.factorial(6) * 2.0**-6 / math.factorial(3) ** 2


@dataclass(frozen=True)
class RecruitmentParams:
    """Filterbank layout and the loudness catch level."""

    n_channels: int = 32
    f_lo_hz: float = 50.0
    f_hi_hz: float = 16000.0
    catch_level_db_spl: float = 105.0

    def __post_init__(self):
        if self.n_channels < 8:
            raise InvalidArgumentError(f"need at least 8 channels, got {self.n_channels}")
        if not (0.0 < self.f_lo_hz < self.f_hi_hz):
            raise InvalidArgumentError(
                f"band edges must satisfy 0 < f_lo < f_hi, got {self.f_lo_hz}, {self.f_hi_hz}"
            )
        if not np.isfinite(self.catch_level_db_spl) or self.catch_level_db_spl <= MAX_EXPANSION_HL_DB:
            raise InvalidArgumentError(
                f"catch level must exceed the {MAX_EXPANSION_HL_DB} dB expansion clamp"
            )


def erb_rate(frequency_hz):
    """Position on the ERB-number scale for a frequency in Hz."""
    f = np.asarray(frequency_hz, dtype=np.float64)
    return 21.4 * np.log10(4.37 * f / 1000.0 + 1.0)


def erb_rate_inverse(rate):
    """Frequency in Hz at a position on the ERB-number scale."""
    r = np.asarray(rate, dtype=np.float64)
    return (np.power(10.0, r / 21.4) - 1.0) * 1000.0 / 4.37


def center_frequencies(params: RecruitmentParams) -> np.ndarray:
    """Band centres (Hz), equally spaced on the ERB-number scale."""
    lo, hi = erb_rate(params.f_lo_hz), erb_rate(params.f_hi_hz)
    return erb_rate_inverse(np.linspace(lo, hi, params.n_channels))


def expansion_ratios(audiogram: Audiogram, params: RecruitmentParams) -> np.ndarray:
    """Per-band exponent catch / (catch - HL), with HL clamped at 80 dB.

    A zero-loss band gets ratio 1 (no expansion). Losses above the clamp
    would otherwise demand near-infinite expansion; they are limited and
    the clamping logged.
    """
    centres = center_frequencies(params)
    hl = np.asarray(interpolate_hl(audiogram, centres), dtype=np.float64)
    over = hl > MAX_EXPANSION_HL_DB
    if np.any(over):
        log.warning(
            "clamping %d of %d bands with hearing loss above %g dB before expansion",
            int(np.count_nonzero(over)),
            hl.size,
            MAX_EXPANSION_HL_DB,
        )
    clamped = np.minimum(hl, MAX_EXPANSION_HL_DB)
    catch = params.catch_level_db_spl
    return catch / (catch - clamped)


def _gammatone_power(freqs: np.ndarray, centre_hz: float) -> np.ndarray:
    """4th-order gammatone magnitude response sampled at freqs (Hz)."""
    b = float(erb_hz(centre_hz)) / _A_GAMMA
    d = (freqs - centre_hz) / b
    return (1.0 + d * d) ** -2.0


def _analytic_spectrum(x: np.ndarray) -> np.ndarray:
    """FFT of the analytic signal of x (positive frequencies doubled)."""
    n = x.shape[0]
    spectrum = fft(x)
    weights = np.zeros(n)
    if n % 2 == 0:
        weights[0] = weights[n // 2] = 1.0
        weights[1 : n // 2] = 2.0
    else:
        weights[0] = 1.0
        weights[1 : (n + 1) // 2] = 2.0
    return spectrum * weights


def _validate(signal: AudioSignal, params: RecruitmentParams) -> np.ndarray:
    x = require_mono(signal, "recruitment")
    if params.f_hi_hz > 0.45 * signal.sample_rate_hz:
        raise InvalidArgumentError(
            f"sample rate {signal.sample_rate_hz} is too low for a filterbank up to {params.f_hi_hz:g} Hz"
        )
    return x


def _iter_channels(x: np.ndarray, rate: int, params: RecruitmentParams):
    """Yield (analytic band signal, level envelope) per band, edge-trimmed."""
    n = x.shape[0]
    pad = _EDGE_PAD
    nfft = next_fast_len(n + 2 * pad)
    padded = np.zeros(nfft)
    padded[pad : pad + n] = x
    analytic = _analytic_spectrum(padded)
    freqs = np.abs(fftfreq(nfft, 1.0 / rate))
    centres = center_frequencies(params)
    synthesis_sum = np.zeros(nfft)
    for fc in centres:
        synthesis_sum += _gammatone_power(freqs, fc)
    sos = butter(2, ENV_LOWPASS_HZ, fs=rate, output="sos")
    trim = slice(pad, pad + n)
    for fc in centres:
        w = _gammatone_power(freqs, fc)
        band = ifft(analytic * (w / synthesis_sum))
        level_band = ifft(analytic * np.minimum(1.0, w / LEVEL_FILTER_KNEE))
        envelope = sosfiltfilt(sos, np.abs(level_band))
        np.clip(envelope, 0.0, None, out=envelope)
        yield band[trim], envelope[trim]


def _catch_envelope(params: RecruitmentParams, ref_spl_db: float) -> float:
    """Envelope amplitude of a sine at the catch level under this calibration."""
    return math.sqrt(2.0) * 10.0 ** ((params.catch_level_db_spl - ref_spl_db) / 20.0)


def apply_recruitment(
    signal: AudioSignal, audiogram: Audiogram, params: RecruitmentParams = RecruitmentParams()
) -> AudioSignal:
    """Expand each band's envelope according to the audiogram.

    Band gain is (envelope / catch_envelope) ** (ratio - 1), never above
    1: sounds at the catch level pass unchanged, quieter sounds are
    attenuated progressively down to the threshold of audibility.
    """
    x = _validate(signal, params)
    ratios = expansion_ratios(audiogram, params)
    env_catch = _catch_envelope(params, signal.ref_spl_db)
    out = np.zeros(x.shape[0])
    for (band, envelope), ratio in zip(_iter_channels(x, signal.sample_rate_hz, params), ratios):
        gain = np.minimum((envelope / env_catch) ** (ratio - 1.0), 1.0)
        out += band.real * gain
    return signal.with_samples(out)


@dataclass(frozen=True)
class RecruitmentChannels:
    """Materialized per-band view of one recruitment application."""

    center_frequencies_hz: np.ndarray
    expansion_ratios: np.ndarray
    components: np.ndarray  # (n_channels, n) complex analytic band signals
    envelopes: np.ndarray  # (n_channels, n) level-estimation envelopes
    gains: np.ndarray  # (n_channels, n) applied gains, in (0, 1]


def recruitment_channels(
    signal: AudioSignal, audiogram: Audiogram, params: RecruitmentParams = RecruitmentParams()
) -> RecruitmentChannels:
    """The per-band signals, envelopes, and gains behind apply_recruitment.

    Materializes (n_channels, n) arrays; intended for inspection and
    tests on short signals, while apply_recruitment streams bands.
    """
    x = _validate(signal, params)
    ratios = expansion_ratios(audiogram, params)
    env_catch = _catch_envelope(params, signal.ref_spl_db)
    components, envelopes, gains = [], [], []
    for (band, envelope), ratio in zip(_iter_channels(x, signal.sample_rate_hz, params), ratios):
        components.append(band)
        envelopes.append(envelope)
        gains.append(np.minimum((envelope / env_catch) ** (ratio - 1.0), 1.0))
    return RecruitmentChannels(
        center_frequencies_hz=center_frequencies(params),
        expansion_ratios=ratios,
        components=np.array(components),
        envelopes=np.array(envelopes),
        gains=np.array(gains),
    )
