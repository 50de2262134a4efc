"""Hearing-loss simulation per ear and per listener.

An ear's audiogram is first mapped to a severity class; the class picks
spectral smearing strength, and the audiogram itself drives loudness
recruitment. A no-loss ear bypasses both stages and returns its input
untouched. Listener-level simulation either processes both ears and
downmixes, or processes only the better ear.
"""
from __future__ import annotations

import numpy as np

from .audio import PROCESSING_RATE_HZ, rms
from .errors import FormatError, InvalidArgumentError
from .model import Audiogram, AudioSignal, ListenerProfile, Severity, classify_severity, interpolate_hl
from .recruitment import RecruitmentParams, apply_recruitment
from .smearing import SMEAR_NFFT, SmearParams, apply_smearing, build_smear_matrix
from .trace import StageTrace

#: Smearing strength (lower, upper broadening) per severity class.
SEVERITY_SMEAR: dict[Severity, SmearParams] = {
    Severity.NONE: SmearParams(1.0, 1.0),
    Severity.MILD: SmearParams(1.6, 1.1),
    Severity.MODERATE: SmearParams(2.4, 1.6),
    Severity.SEVERE: SmearParams(4.0, 2.0),
}

#: Frequencies averaged to pick the better ear.
BETTER_EAR_FREQS_HZ = (500.0, 1000.0, 2000.0, 4000.0)


def smear_params_for(severity: Severity) -> SmearParams:
    """Smearing broadening factors for a severity class."""
    return SEVERITY_SMEAR[severity]


def simulate_ear(
    signal: AudioSignal,
    audiogram: Audiogram,
    params: RecruitmentParams = RecruitmentParams(),
    trace: StageTrace | None = None,
) -> AudioSignal:
    """Simulate one ear's hearing loss on a mono signal at the processing rate.

    Runs spectral smearing then loudness recruitment. A severity of NONE
    returns the input signal object unchanged, bit for bit.
    """
    if signal.n_channels != 1:
        raise InvalidArgumentError(f"ear simulation expects mono, got {signal.n_channels} channels")
    if signal.sample_rate_hz != PROCESSING_RATE_HZ:
        raise InvalidArgumentError(
            f"ear simulation runs at {PROCESSING_RATE_HZ} Hz, got {signal.sample_rate_hz}"
        )
    severity = classify_severity(audiogram)
    if severity is Severity.NONE:
        return signal
    matrix = build_smear_matrix(smear_params_for(severity), SMEAR_NFFT, signal.sample_rate_hz)
    smeared = apply_smearing(signal, matrix)
    if trace is not None:
        trace.add("smear", rms(signal), rms(smeared))
    recruited = apply_recruitment(smeared, audiogram, params)
    if trace is not None:
        trace.add("recruit", rms(smeared), rms(recruited))
    return recruited


def split_ears(signal: AudioSignal) -> tuple[AudioSignal, AudioSignal]:
    """(left, right) mono signals; a mono input feeds both ears."""
    if signal.n_channels == 1:
        return signal, signal
    if signal.n_channels == 2:
        left = AudioSignal(signal.samples[0], signal.sample_rate_hz, signal.ref_spl_db)
        right = AudioSignal(signal.samples[1], signal.sample_rate_hz, signal.ref_spl_db)
        return left, right
    raise FormatError(f"expected mono or stereo, got {signal.n_channels} channels")


def better_ear(listener: ListenerProfile) -> str:
    """'left' or 'right': the ear with the lower mean threshold.

    The mean is taken over 500, 1000, 2000, and 4000 Hz. Ties go left.
    """
    freqs = np.asarray(BETTER_EAR_FREQS_HZ)
    left_avg = float(np.mean(interpolate_hl(listener.left, freqs)))
    right_avg = float(np.mean(interpolate_hl(listener.right, freqs)))
    return "left" if left_avg <= right_avg else "right"


def downmix(left: AudioSignal, right: AudioSignal) -> AudioSignal:
    """Mono mean of two equal-length mono signals."""
    if left.n_samples != right.n_samples or left.sample_rate_hz != right.sample_rate_hz:
        raise InvalidArgumentError("downmix needs equal-length signals at the same rate")
    return left.with_samples(0.5 * (left.channel(0) + right.channel(0)))


def simulate_listener(
    signal: AudioSignal,
    listener: ListenerProfile,
    params: RecruitmentParams = RecruitmentParams(),
    better_ear_only: bool = False,
    trace: StageTrace | None = None,
) -> AudioSignal:
    """Simulate a listener's hearing loss; returns a mono signal.

    With better_ear_only, only the ear with the lower four-frequency
    average is simulated and returned. Otherwise both ears are simulated
    independently and averaged.
    """
    left, right = split_ears(signal)
    if better_ear_only:
        side = better_ear(listener)
        ear_signal = left if side == "left" else right
        ear_gram = listener.left if side == "left" else listener.right
        return simulate_ear(ear_signal, ear_gram, params, trace)
    out_left = simulate_ear(left, listener.left, params, trace)
    out_right = simulate_ear(right, listener.right, params, trace)
    return downmix(out_left, out_right)
