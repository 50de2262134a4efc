"""Command-line interface.

    hapredict run        batch-assess a manifest and write report.json/.csv
    hapredict simulate   hearing-loss simulation (and compensation) of one file
    hapredict transcribe run both ASR judges on one file
    hapredict score      score one transcript text
    hapredict evaluate   recompute metrics from an existing report.json

Exit codes: 0 success, 1 configuration or operational error, 2 when every
utterance in a batch failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .audio import PROCESSING_RATE_HZ, read_wav, resample, rms, write_wav
from .config import load_config
from .errors import ConfigError, HapredictError
from .hlsim import SMEAR_NFFT, better_ear, downmix, simulate_ear, smear_params_for, split_ears
from .judges import JudgeFailure, run_judges
from .manifest import load_listeners, load_manifest
from .metrics import lcc, rmse, srcc
from .model import classify_severity, Severity
from .nalr import DEFAULT_N_TAPS, compensate, design_fir, prescribe
from .pipeline import plan_pipeline, run_pipeline
from .recruitment import RecruitmentParams, center_frequencies, expansion_ratios
from .report import render_improvement, render_summary, write_report_csv, write_report_json
from .scorer import ScoreClient
from .smearing import build_smear_matrix
from .trace import StageTrace


class _Parser(argparse.ArgumentParser):
    """argparse reserves exit code 2 for usage errors; this CLI uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="hapredict", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="assess a manifest end to end")
    run.add_argument("--manifest", required=True)
    run.add_argument("--listeners", required=True)
    run.add_argument("--config", required=True)
    run.add_argument("--cache-dir", default=None)
    run.add_argument("--jobs", type=int, default=None)
    run.add_argument("--dry-run", action="store_true")
    run.add_argument("--out-dir", default=".")
    run.add_argument("--audio-dir", default=None)
    run.add_argument("--ref-spl", type=float, default=None)
    run.add_argument("--better-ear", action="store_true")
    run.add_argument("--judge-weights", type=float, nargs=2, default=None, metavar=("W_SMALL", "W_LARGE"))
    run.add_argument("--baseline-rmse", type=float, default=None)
    run.set_defaults(func=_cmd_run)

    sim = sub.add_parser("simulate", help="simulate hearing loss on one WAV file")
    sim.add_argument("--in", dest="infile", required=True)
    sim.add_argument("--out", dest="outfile", default=None)
    sim.add_argument("--listeners", required=True)
    sim.add_argument("--listener", required=True)
    sim.add_argument("--ref-spl", type=float, default=None)
    sim.add_argument("--better-ear", action="store_true")
    sim.add_argument("--no-compensate", action="store_true", help="stop after hearing-loss simulation")
    sim.add_argument("--dump-fitting", default=None, metavar="PATH", help="write prescription and taps as JSON")
    sim.add_argument("--debug-dump", default=None, metavar="PATH", help="write smear matrix and expansion ratios as JSON")
    sim.add_argument("--dry-run", action="store_true", help="print stage traces, write nothing")
    sim.set_defaults(func=_cmd_simulate)

    tr = sub.add_parser("transcribe", help="run both ASR judges on one WAV file")
    tr.add_argument("--in", dest="infile", required=True)
    tr.add_argument("--config", required=True)
    tr.add_argument("--utterance-id", default=None)
    tr.set_defaults(func=_cmd_transcribe)

    sc = sub.add_parser("score", help="score one transcript text")
    sc.add_argument("--config", required=True)
    group = sc.add_mutually_exclusive_group(required=True)
    group.add_argument("--text", default=None)
    group.add_argument("--text-file", default=None)
    sc.add_argument("--judge-id", default="small", choices=("small", "large"))
    sc.add_argument("--cache-dir", default=None)
    sc.set_defaults(func=_cmd_score)

    ev = sub.add_parser("evaluate", help="recompute metrics from a report.json")
    ev.add_argument("--report", required=True)
    ev.add_argument("--baseline-rmse", type=float, default=None)
    ev.set_defaults(func=_cmd_evaluate)
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.ref_spl is not None:
        config = replace(config, ref_spl_db=args.ref_spl)
    if args.better_ear:
        config = replace(config, better_ear=True)
    if args.judge_weights is not None:
        config = replace(config, judge_weights=(args.judge_weights[0], args.judge_weights[1]))
    audio_dir = args.audio_dir if args.audio_dir is not None else config.audio_dir
    records = load_manifest(args.manifest, audio_dir)
    listeners = load_listeners(args.listeners)
    if not records:
        raise ConfigError("manifest contains no utterances")

    if args.dry_run:
        for assessment in plan_pipeline(records, listeners, config, args.jobs):
            print(f"utterance={assessment.utterance_id}")
            for line in assessment.trace.lines():
                print(f"  {line}")
            if assessment.failure is not None:
                print(f"  failed stage={assessment.failure.stage}: {assessment.failure.message}")
        return 0

    report = run_pipeline(records, listeners, config, args.cache_dir, args.jobs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out_dir / "report.json")
    write_report_csv(report, out_dir / "report.csv")
    print(render_summary(report, args.baseline_rmse))
    print(f"report written to {out_dir / 'report.json'} and {out_dir / 'report.csv'}")
    if report.n_utterances > 0 and report.n_failed == report.n_utterances:
        return 2
    return 0


def _severity_debug(audiogram, params: RecruitmentParams) -> dict:
    severity = classify_severity(audiogram)
    entry: dict = {"severity": severity.value}
    if severity is not Severity.NONE:
        smear = smear_params_for(severity)
        matrix = build_smear_matrix(smear, SMEAR_NFFT, PROCESSING_RATE_HZ)
        entry["smear"] = {
            "broaden_lower": smear.broaden_lower,
            "broaden_upper": smear.broaden_upper,
            "nfft": matrix.nfft,
            "entries": matrix.entries.tolist(),
        }
        entry["recruitment"] = {
            "center_frequencies_hz": center_frequencies(params).tolist(),
            "expansion_ratios": expansion_ratios(audiogram, params).tolist(),
        }
    return entry


def _cmd_simulate(args) -> int:
    listeners = load_listeners(args.listeners)
    if args.listener not in listeners:
        raise ConfigError(f"listener {args.listener!r} not present in {args.listeners}")
    listener = listeners[args.listener]
    kwargs = {} if args.ref_spl is None else {"ref_spl_db": args.ref_spl}
    signal = resample(read_wav(args.infile, **kwargs), PROCESSING_RATE_HZ)

    left, right = split_ears(signal)
    if args.better_ear:
        side = better_ear(listener)
        ears = [(side, left if side == "left" else right, getattr(listener, side))]
    else:
        ears = [("left", left, listener.left), ("right", right, listener.right)]

    params = RecruitmentParams()
    outputs = []
    for name, ear_signal, audiogram in ears:
        trace = StageTrace()
        out = simulate_ear(ear_signal, audiogram, params, trace)
        if not args.no_compensate:
            compensated = compensate(out, audiogram)
            trace.add("nalr", rms(out), rms(compensated))
            out = compensated
        outputs.append(out)
        for line in trace.lines():
            print(f"ear={name} {line}")

    result = outputs[0] if len(outputs) == 1 else downmix(outputs[0], outputs[1])
    if args.dump_fitting:
        dump = {}
        for name, _, audiogram in ears:
            prescription = prescribe(audiogram)
            fir = design_fir(prescription, DEFAULT_N_TAPS, PROCESSING_RATE_HZ)
            dump[name] = {
                "prescription": {
                    "frequencies_hz": list(prescription.frequencies_hz),
                    "gains_db": list(prescription.gains_db),
                },
                "n_taps": fir.n_taps,
                "taps": fir.taps.tolist(),
            }
        Path(args.dump_fitting).write_text(json.dumps(dump, indent=2, sort_keys=True), encoding="utf-8")
    if args.debug_dump:
        dump = {name: _severity_debug(audiogram, params) for name, _, audiogram in ears}
        Path(args.debug_dump).write_text(json.dumps(dump, indent=2, sort_keys=True), encoding="utf-8")
    if args.dry_run:
        return 0
    if not args.outfile:
        raise ConfigError("simulate needs --out unless --dry-run is given")
    clipped = write_wav(result, args.outfile)
    if clipped:
        print(f"warning: {clipped} sample(s) clipped at full scale", file=sys.stderr)
    print(f"wrote {args.outfile}")
    return 0


def _cmd_transcribe(args) -> int:
    config = load_config(args.config)
    signal = read_wav(args.infile, config.ref_spl_db)
    out_small, out_large = run_judges(
        config.judge_small, config.judge_large, signal, args.utterance_id
    )
    payload = {}
    ok = True
    for outcome in (out_small, out_large):
        if isinstance(outcome, JudgeFailure):
            payload[outcome.judge_id] = {"error": outcome.kind, "message": outcome.message}
            ok = False
        else:
            payload[outcome.judge_id] = {"text": outcome.text, "backend": outcome.backend_kind}
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if ok else 1


def _cmd_score(args) -> int:
    from .judges import Transcript  # local import keeps CLI namespace flat

    config = load_config(args.config)
    text = args.text if args.text is not None else Path(args.text_file).read_text(encoding="utf-8")
    client = ScoreClient(config.scorer, config.prompt, args.cache_dir)
    result = client.score_transcript(Transcript(text, args.judge_id, 0.0, "fixture"))
    print(json.dumps({"score": result.value, "judge_id": result.judge_id, "cached": result.cached}))
    return 0


def _cmd_evaluate(args) -> int:
    data = json.loads(Path(args.report).read_text(encoding="utf-8"))
    rows = data.get("utterances", [])
    pairs = [
        (row["final_score"], row["correctness"])
        for row in rows
        if row.get("final_score") is not None and row.get("correctness") is not None
    ]
    print(f"utterances: {len(rows)}  labeled and scored: {len(pairs)}")
    if not pairs:
        print("metrics absent: no scored utterances carry correctness labels")
        return 0
    predictions = [p for p, _ in pairs]
    labels = [t for _, t in pairs]
    value = rmse(predictions, labels)
    print(f"rmse: {value:.4f}")
    if len(pairs) >= 2:
        try:
            print(f"lcc: {lcc(predictions, labels):.4f}  srcc: {srcc(predictions, labels):.4f}")
        except HapredictError as exc:
            print(f"correlations absent: {exc}")
    if args.baseline_rmse is not None:
        for line in render_improvement(args.baseline_rmse, value):
            print(line)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HapredictError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
