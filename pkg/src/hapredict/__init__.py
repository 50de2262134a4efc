"""Hearing-aid speech intelligibility prediction pipeline.

Simulates a listener's hearing loss on calibrated audio, compensates it
with a prescription filter, transcribes the result with two ASR judges,
scores each transcript's naturalness with a language model, and averages
the scores into an intelligibility prediction evaluated against
subjective labels.
"""
from .audio import PROCESSING_RATE_HZ, level_db_spl, read_wav, resample, write_wav
from .errors import HapredictError
from .hlsim import simulate_ear, simulate_listener
from .judges import JudgeConfig, Transcript, run_judges, transcribe
from .manifest import load_listeners, load_manifest
from .metrics import lcc, relative_improvement, rmse, score_average, srcc
from .model import Audiogram, AudioSignal, ListenerProfile, Severity, classify_severity, interpolate_hl
from .nalr import compensate, design_fir, prescribe
from .pipeline import EvaluationReport, UtteranceAssessment, plan_pipeline, run_pipeline
from .recruitment import RecruitmentParams, apply_recruitment
from .scorer import JudgeScore, PromptTemplate, ScoreClient, ScorerConfig, build_prompt, parse_score
from .smearing import SmearMatrix, SmearParams, apply_smearing, build_smear_matrix

__version__ = "0.1.0"

__all__ = [
    "Audiogram",
    "AudioSignal",
    "EvaluationReport",
    "HapredictError",
    "JudgeConfig",
    "JudgeScore",
    "ListenerProfile",
    "PROCESSING_RATE_HZ",
    "PromptTemplate",
    "RecruitmentParams",
    "ScoreClient",
    "ScorerConfig",
    "Severity",
    "SmearMatrix",
    "SmearParams",
    "Transcript",
    "UtteranceAssessment",
    "apply_recruitment",
    "apply_smearing",
    "build_prompt",
    "build_smear_matrix",
    "classify_severity",
    "compensate",
    "design_fir",
    "interpolate_hl",
    "lcc",
    "level_db_spl",
    "load_listeners",
    "load_manifest",
    "parse_score",
    "plan_pipeline",
    "prescribe",
    "read_wav",
    "relative_improvement",
    "resample",
    "rmse",
    "run_judges",
    "run_pipeline",
    "score_average",
    "simulate_ear",
    "simulate_listener",
    "srcc",
    "transcribe",
    "write_wav",
]
