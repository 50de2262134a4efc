"""Batch assessment pipeline.

Per utterance: ingest and resample, simulate the listener's hearing loss
per ear, compensate each ear with its prescription filter, downmix, run
both ASR judges on identical payloads, score both transcripts, and
average. Failures are recorded per utterance and never abort the batch;
resolution problems (missing files, unknown listeners) abort before any
processing starts.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .audio import PROCESSING_RATE_HZ, read_wav, resample
from .config import RunConfig
from .errors import BackendError, ConfigError, HapredictError, ScorerUnavailableError, ScoringFailedError
from .hlsim import better_ear, downmix, simulate_ear, split_ears
from .judges import ASR_SAMPLE_RATE_HZ, BackendLimiter, JudgeFailure, Transcript, run_judges
from .manifest import ManifestRecord
from .metrics import lcc, rmse, score_average, srcc
from .model import AudioSignal, ListenerProfile
from .nalr import compensate
from .scorer import ScoreClient
from .trace import StageTrace

#: Pipeline stages in execution order, as they appear in dry-run traces.
PIPELINE_STAGES = (
    "msbg",
    "nalr",
    "judge_small",
    "judge_large",
    "score_small",
    "score_large",
    "average",
)


@dataclass(frozen=True)
class FailureRecord:
    """Where and why one utterance dropped out of the batch."""

    stage: str
    kind: str
    message: str


@dataclass
class UtteranceAssessment:
    """Everything the pipeline produced for one utterance."""

    utterance_id: str
    listener_id: str
    system_id: str
    correctness: float | None
    transcript_small: str | None = None
    transcript_large: str | None = None
    score_small: float | None = None
    score_large: float | None = None
    final_score: float | None = None
    failure: FailureRecord | None = None
    trace: StageTrace = field(default_factory=StageTrace)


@dataclass
class EvaluationReport:
    """Batch results: per-utterance records plus aggregate metrics."""

    assessments: list[UtteranceAssessment]
    n_scored: int
    n_failed: int
    rmse: float | None
    lcc: float | None
    srcc: float | None
    n_metric_pairs: int
    metrics_note: str | None
    config_fingerprint: str

    @property
    def n_utterances(self) -> int:
        return len(self.assessments)


def config_fingerprint(config: RunConfig) -> str:
    """Digest of the semantically relevant configuration.

    Deployment-local details (endpoints, directories, timeouts, limits)
    are excluded: two runs configured to produce the same numbers get
    the same fingerprint regardless of where their backends live.
    """
    payload = {
        "processing_rate_hz": PROCESSING_RATE_HZ,
        "asr_rate_hz": ASR_SAMPLE_RATE_HZ,
        "ref_spl_db": config.ref_spl_db,
        "better_ear": config.better_ear,
        "judge_weights": list(config.judge_weights),
        "judges": {
            j.judge_id: {"kind": j.backend_kind, "model": j.model}
            for j in (config.judge_small, config.judge_large)
        },
        "scorer": {"kind": config.scorer.kind, "model": config.scorer.model},
        "prompt": config.prompt.fingerprint(),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def _pooled_rms(signals: list[AudioSignal]) -> float:
    stacked = np.concatenate([s.samples.ravel() for s in signals])
    return float(np.sqrt(np.mean(np.square(stacked))))


def _apply_aid_path(
    signal: AudioSignal, listener: ListenerProfile, config: RunConfig, trace: StageTrace
) -> AudioSignal:
    """Hearing-loss simulation then per-ear compensation, then downmix."""
    left, right = split_ears(signal)
    if config.better_ear:
        side = better_ear(listener)
        ears = [(left, listener.left) if side == "left" else (right, listener.right)]
    else:
        ears = [(left, listener.left), (right, listener.right)]
    simulated = [simulate_ear(ear_signal, gram) for ear_signal, gram in ears]
    trace.add("msbg", _pooled_rms([s for s, _ in ears]), _pooled_rms(simulated))
    compensated = [compensate(sim, gram) for sim, (_, gram) in zip(simulated, ears)]
    trace.add("nalr", _pooled_rms(simulated), _pooled_rms(compensated))
    if len(compensated) == 1:
        return compensated[0]
    return downmix(compensated[0], compensated[1])


def process_utterance(
    record: ManifestRecord,
    listeners: Mapping[str, ListenerProfile],
    config: RunConfig,
    client: ScoreClient,
    limiters: Mapping[str, BackendLimiter] | None = None,
    dry_run: bool = False,
) -> UtteranceAssessment:
    """Run the full per-utterance path; failures become a typed record.

    With dry_run the signal path (simulation and compensation) still
    executes so the trace carries real levels, but no judge or scorer
    backend is invoked; the remaining stages are only marked as planned.
    """
    assessment = UtteranceAssessment(
        record.utterance_id, record.listener_id, record.system_id, record.correctness
    )
    trace = assessment.trace
    stage = "ingest"
    try:
        signal = resample(read_wav(record.signal_path, config.ref_spl_db), PROCESSING_RATE_HZ)
        listener = listeners[record.listener_id]
        stage = "msbg"
        processed = _apply_aid_path(signal, listener, config, trace)
        if dry_run:
            for name in PIPELINE_STAGES[2:]:
                trace.mark(name)
            return assessment

        stage = "judge"
        out_small, out_large = run_judges(
            config.judge_small, config.judge_large, processed, record.utterance_id, limiters
        )
        for outcome in (out_small, out_large):
            trace.mark(f"judge_{outcome.judge_id}")
        if isinstance(out_small, Transcript):
            assessment.transcript_small = out_small.text
        if isinstance(out_large, Transcript):
            assessment.transcript_large = out_large.text
        for outcome in (out_small, out_large):
            if isinstance(outcome, JudgeFailure):
                assessment.failure = FailureRecord(f"judge_{outcome.judge_id}", outcome.kind, outcome.message)
                return assessment

        scores: dict[str, float] = {}
        for transcript in (out_small, out_large):
            stage = f"score_{transcript.judge_id}"
            try:
                scores[transcript.judge_id] = client.score_transcript(transcript).value
                trace.mark(stage)
            except (ScorerUnavailableError, ScoringFailedError, BackendError, ConfigError) as exc:
                assessment.failure = FailureRecord(stage, type(exc).__name__, str(exc))
                return assessment
        assessment.score_small = scores["small"]
        assessment.score_large = scores["large"]
        stage = "average"
        assessment.final_score = score_average(scores["small"], scores["large"], config.judge_weights)
        trace.mark(stage)
    except (HapredictError, OSError) as exc:
        assessment.failure = FailureRecord(stage, type(exc).__name__, str(exc))
    return assessment


def _preflight(records: list[ManifestRecord], listeners: Mapping[str, ListenerProfile]) -> None:
    unknown = sorted({r.listener_id for r in records if r.listener_id not in listeners})
    if unknown:
        raise ConfigError(f"manifest references unknown listener ids: {unknown}")
    missing = [str(r.signal_path) for r in records if not r.signal_path.is_file()]
    if missing:
        shown = ", ".join(missing[:5]) + (", ..." if len(missing) > 5 else "")
        raise ConfigError(f"{len(missing)} manifest audio file(s) missing: {shown}")


def _run_workers(
    records: list[ManifestRecord],
    listeners: Mapping[str, ListenerProfile],
    config: RunConfig,
    client: ScoreClient,
    jobs: int | None,
    dry_run: bool,
) -> list[UtteranceAssessment]:
    _preflight(records, listeners)
    limiters = {
        judge_id: BackendLimiter(config.judges.max_concurrency, config.judges.rate_per_s)
        for judge_id in ("small", "large")
    }
    workers = jobs if jobs and jobs > 0 else (os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        assessments = list(
            pool.map(
                lambda record: process_utterance(record, listeners, config, client, limiters, dry_run),
                records,
            )
        )
    return sorted(assessments, key=lambda a: a.utterance_id)


def plan_pipeline(
    records: list[ManifestRecord],
    listeners: Mapping[str, ListenerProfile],
    config: RunConfig,
    jobs: int | None = None,
) -> list[UtteranceAssessment]:
    """Dry run: execute the signal path for its trace, touch no backend."""
    client = ScoreClient(config.scorer, config.prompt, cache_dir=None)
    return _run_workers(records, listeners, config, client, jobs, dry_run=True)


def run_pipeline(
    records: list[ManifestRecord],
    listeners: Mapping[str, ListenerProfile],
    config: RunConfig,
    cache_dir=None,
    jobs: int | None = None,
    client: ScoreClient | None = None,
) -> EvaluationReport:
    """Assess every utterance and aggregate metrics into a report.

    Metrics cover utterances that have both a final score and a
    correctness label; when fewer than two such pairs exist, or ranks
    collapse, the affected metrics are absent and the reason noted.
    Records are reported in utterance_id order regardless of worker
    scheduling, and a warm score cache makes a re-run byte-identical.
    """
    if client is None:
        client = ScoreClient(config.scorer, config.prompt, cache_dir)
    assessments = _run_workers(records, listeners, config, client, jobs, dry_run=False)

    predictions = [a.final_score for a in assessments if a.final_score is not None and a.correctness is not None]
    labels = [a.correctness for a in assessments if a.final_score is not None and a.correctness is not None]
    report_rmse = report_lcc = report_srcc = None
    note = None
    if not predictions:
        note = "metrics absent: no scored utterances carry correctness labels"
    else:
        report_rmse = rmse(predictions, labels)
        if len(predictions) < 2:
            note = "correlations absent: only one labeled scored utterance"
        else:
            try:
                report_lcc = lcc(predictions, labels)
                report_srcc = srcc(predictions, labels)
            except HapredictError as exc:
                note = f"correlations absent: {exc}"
    return EvaluationReport(
        assessments=assessments,
        n_scored=sum(1 for a in assessments if a.final_score is not None),
        n_failed=sum(1 for a in assessments if a.failure is not None),
        rmse=report_rmse,
        lcc=report_lcc,
        srcc=report_srcc,
        n_metric_pairs=len(predictions),
        metrics_note=note,
        config_fingerprint=config_fingerprint(config),
    )
