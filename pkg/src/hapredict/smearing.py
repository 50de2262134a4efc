"""Spectral smearing of the short-time power spectrum.

Models the broadened auditory filters of an impaired cochlea. Each output
frequency bin collects power from its neighbours according to a smearing
matrix built from rounded-exponential filter shapes: the matrix maps the
power spectrum seen through normal filters to the one seen through
filters broadened asymmetrically below and above their centre. The
waveform is reassembled by weighted overlap-add using the original phase.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import irfft, rfft
from scipy.signal.windows import hann

from .errors import ConditioningError, InvalidArgumentError
from .model import AudioSignal

#: Analysis window length in samples; hop is a quarter window.
SMEAR_NFFT = 512

_MIN_NFFT = 128
_MAX_CONDITION = 1e12


def erb_hz(frequency_hz):
    """Equivalent rectangular bandwidth (Hz) of the normal auditory filter."""
    f = np.asarray(frequency_hz, dtype=np.float64)
    return 24.7 * (4.37 * f / 1000.0 + 1.0)


@dataclass(frozen=True)
class SmearParams:
    """Broadening factors for the lower and upper filter skirts.

    1.0 on both sides reproduces normal filters. Values above 1.0 widen
    the corresponding skirt, smearing energy toward that side.
    """

    broaden_lower: float
    broaden_upper: float

    def __post_init__(self):
        for name, value in (("broaden_lower", self.broaden_lower), ("broaden_upper", self.broaden_upper)):
            if not np.isfinite(value) or value < 1.0:
                raise InvalidArgumentError(f"{name} must be finite and >= 1.0, got {value!r}")
        object.__setattr__(self, "broaden_lower", float(self.broaden_lower))
        object.__setattr__(self, "broaden_upper", float(self.broaden_upper))


@dataclass(frozen=True)
class SmearMatrix:
    """Power-domain smearing operator over the rfft bins of one frame size."""

    entries: np.ndarray  # (n_bins, n_bins), rows sum to 1
    nfft: int
    sample_rate_hz: int

    @property
    def n_bins(self) -> int:
        return self.entries.shape[0]


def _roex_rows(nfft: int, sample_rate_hz: int, broaden_lower: float, broaden_upper: float) -> np.ndarray:
    """One rounded-exponential filter per rfft bin, rows normalized to unit sum.

    Filter at centre f_c has shape (1 + p|g|) exp(-p|g|) with g the
    relative deviation (f - f_c) / f_c and p = 4 f_c / ERB(f_c) divided by
    the skirt's broadening factor. The DC row keeps only its own bin.
    """
    n_bins = nfft // 2 + 1
    freqs = np.arange(n_bins) * (sample_rate_hz / nfft)
    rows = np.zeros((n_bins, n_bins))
    rows[0, 0] = 1.0
    centres = freqs[1:][:, np.newaxis]
    p_nominal = 4.0 * centres / erb_hz(centres)
    g = (freqs[np.newaxis, :] - centres) / centres
    p = np.where(g < 0.0, p_nominal / broaden_lower, p_nominal / broaden_upper)
    pg = p * np.abs(g)
    shape = (1.0 + pg) * np.exp(-pg)
    rows[1:] = shape / shape.sum(axis=1, keepdims=True)
    return rows


@lru_cache(maxsize=8)
def build_smear_matrix(
    params: SmearParams, nfft: int = SMEAR_NFFT, sample_rate_hz: int = 44100
) -> SmearMatrix:
    """Smearing matrix mapping normal-filter power to broadened-filter power.

    Computed as pinv(N) @ B where N holds normal filter shapes and B the
    broadened ones, then cleaned up: negative entries from the inversion
    are clipped to zero and rows renormalized to unit sum so white power
    is preserved. Results are cached; the entries array is read-only and
    safe to share across threads.

    Raises ConditioningError if the normal-filter matrix is too
    ill-conditioned to invert, InvalidArgumentError for a frame size
    that is not a power of two >= 128.
    """
    if nfft < _MIN_NFFT or (nfft & (nfft - 1)) != 0:
        raise InvalidArgumentError(f"nfft must be a power of two >= {_MIN_NFFT}, got {nfft}")
    if sample_rate_hz <= 0:
        raise InvalidArgumentError(f"sample rate must be positive, got {sample_rate_hz}")
    normal = _roex_rows(nfft, sample_rate_hz, 1.0, 1.0)
    condition = np.linalg.cond(normal)
    if not np.isfinite(condition) or condition > _MAX_CONDITION:
        raise ConditioningError(
            f"normal-filter matrix condition number {condition:.3g} exceeds {_MAX_CONDITION:.0e}"
        )
    broadened = _roex_rows(nfft, sample_rate_hz, params.broaden_lower, params.broaden_upper)
    entries = np.linalg.pinv(normal) @ broadened
    np.clip(entries, 0.0, None, out=entries)
    sums = entries.sum(axis=1, keepdims=True)
    degenerate = sums[:, 0] <= 0.0
    if np.any(degenerate):  # pragma: no cover - inversion keeps the diagonal positive
        entries[degenerate] = np.eye(entries.shape[0])[degenerate]
        sums = entries.sum(axis=1, keepdims=True)
    entries /= sums
    entries.setflags(write=False)
    return SmearMatrix(entries, nfft, int(sample_rate_hz))


def apply_smearing(signal: AudioSignal, matrix: SmearMatrix) -> AudioSignal:
    """Smear a mono signal's short-time power spectrum through the matrix.

    Frames of matrix.nfft samples are taken at quarter-window hops under
    a periodic Hann window; each frame's bin powers are redistributed by
    the matrix, magnitudes recombined with the original phase, and the
    result overlap-added with window-squared normalization. The edges are
    zero-padded so output length equals input length. A zero signal stays
    zero; identity parameters change the signal only at numerical noise
    level.
    """
    if signal.n_channels != 1:
        raise InvalidArgumentError(f"smearing expects a mono signal, got {signal.n_channels} channels")
    if signal.sample_rate_hz != matrix.sample_rate_hz:
        raise InvalidArgumentError(
            f"signal rate {signal.sample_rate_hz} does not match matrix rate {matrix.sample_rate_hz}"
        )
    nfft = matrix.nfft
    hop = nfft // 4
    x = signal.channel(0)
    n = x.shape[0]

    pad = nfft
    total = n + 2 * pad
    n_frames = max(1, -(-(total - nfft) // hop) + 1)
    padded_len = (n_frames - 1) * hop + nfft
    padded = np.zeros(padded_len)
    padded[pad : pad + n] = x

    window = hann(nfft, sym=False)
    starts = np.arange(n_frames) * hop
    frames = np.lib.stride_tricks.sliding_window_view(padded, nfft)[starts]
    spectra = rfft(frames * window, axis=1)

    power = np.abs(spectra) ** 2
    smeared = power @ matrix.entries.T
    magnitude = np.sqrt(np.clip(smeared, 0.0, None))
    abs_spec = np.abs(spectra)
    phase = np.where(abs_spec > 0.0, spectra / np.where(abs_spec > 0.0, abs_spec, 1.0), 1.0)
    out_frames = irfft(magnitude * phase, n=nfft, axis=1) * window

    out = np.zeros(padded_len)
    weight = np.zeros(padded_len)
    wsq = window * window
    for i in range(n_frames):
        lo = starts[i]
        out[lo : lo + nfft] += out_frames[i]
        weight[lo : lo + nfft] += wsq
    live = weight > 1e-12
    out[live] /= weight[live]
    return signal.with_samples(out[pad : pad + n])
