"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 validation error (unreadable or
malformed inputs, bad configs), 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import load_config
from .distill import distill_student
from .errors import FlowvocError, ValidationError
from .evaluation import (
    evaluate_pairs,
    load_ratings_csv,
    paired_t_holm,
    relative_mushra,
)
from .signal import extract_mel, load_waveform, save_waveform
from .synthesis import Synthesizer, SynthesisRequest
from .teacher import train_teacher

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the exit-code contract
    # reserves 2 for validation errors, so route usage errors to 1 instead.
    def error(self, message):
        raise _UsageError(message)


def _add_config_options(parser):
    parser.add_argument("--config", default=None, help="key = value config file")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config field, e.g. --set distill.steps=1000",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowvoc", description="Flow vocoder toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("extract-features", help="mel features from a WAV file")
    p.add_argument("--audio", required=True)
    p.add_argument("--out", required=True, help="output .npy of (T, n_mels) log-mel frames")
    _add_config_options(p)

    p = sub.add_parser("train-teacher", help="train the autoregressive teacher")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    _add_config_options(p)

    p = sub.add_parser("distill", help="distill the flow student from a teacher checkpoint")
    p.add_argument("--teacher", required=True, help="teacher checkpoint path")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    _add_config_options(p)

    p = sub.add_parser("synthesize", help="render a waveform from saved mel features")
    p.add_argument("--mel", required=True, help=".npy file of (T, n_mels) log-mel frames")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--embedding-mode",
        choices=("zero", "explicit", "from-reference"),
        default="zero",
    )
    p.add_argument("--embedding", default=None, help=".npy 48-dim vector (explicit mode)")
    p.add_argument("--reference", default=None, help="reference WAV (from-reference mode)")

    p = sub.add_parser("resynthesize", help="analyze a WAV and render it back")
    p.add_argument("--audio", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--embedding-mode", choices=("zero", "from-reference"), default="from-reference"
    )

    p = sub.add_parser("evaluate", help="objective metrics for reference/synthesis pairs")
    p.add_argument("--reference", default=None, help="reference WAV (single-pair mode)")
    p.add_argument("--synthesis", default=None, help="synthesized WAV (single-pair mode)")
    p.add_argument(
        "--pairs",
        default=None,
        help="CSV utterance_id,reference_path,synthesis_path (paths relative to the CSV)",
    )
    p.add_argument("--out", default=None, help="write the JSON report here")
    _add_config_options(p)

    p = sub.add_parser("stats", help="listening-test statistics from a ratings CSV")
    p.add_argument("--ratings", required=True)
    p.add_argument("--system", required=True, help="system under test")
    p.add_argument("--reference", required=True, help="reference system")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument(
        "--compare",
        action="append",
        default=[],
        metavar="A:B",
        help="paired comparison, repeatable; Holm-corrected as a family",
    )

    p = sub.add_parser("rtf", help="measure the synthesis real-time factor")
    p.add_argument("--mel", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embedding-mode", choices=("zero",), default="zero")

    return parser


def _load_mel_npy(path) -> np.ndarray:
    try:
        mel = np.load(path)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read mel file {path}: {exc}") from exc
    if mel.ndim != 2:
        raise ValidationError(f"mel file {path} must hold a 2-D array, got shape {mel.shape}")
    return mel


def _cmd_extract_features(args) -> int:
    config = load_config(args.config, args.set)
    mel = extract_mel(load_waveform(args.audio), config.mel)
    np.save(args.out, mel.frames)
    print(f"wrote {mel.n_frames} x {mel.frames.shape[1]} log-mel frames to {args.out}")
    return EXIT_OK


def _cmd_train_teacher(args) -> int:
    config = load_config(args.config, args.set)
    path = train_teacher(args.manifest, config, args.out_dir, seed=args.seed)
    print(f"teacher checkpoint: {path}")
    return EXIT_OK


def _cmd_distill(args) -> int:
    config = load_config(args.config, args.set)
    path = distill_student(args.teacher, args.manifest, config, args.out_dir, seed=args.seed)
    print(f"student checkpoint: {path}")
    return EXIT_OK


def _cmd_synthesize(args) -> int:
    synthesizer = Synthesizer(args.checkpoint)
    mode = args.embedding_mode.replace("-", "_")
    embedding = None
    reference = None
    if mode == "explicit":
        if args.embedding is None:
            raise ValidationError("--embedding-mode explicit needs --embedding")
        try:
            embedding = np.load(args.embedding)
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read embedding file {args.embedding}: {exc}") from exc
    if mode == "from_reference":
        if args.reference is None:
            raise ValidationError("--embedding-mode from-reference needs --reference")
        reference = load_waveform(args.reference)
    request = SynthesisRequest(
        mel=_load_mel_npy(args.mel),
        embedding_mode=mode,
        embedding=embedding,
        reference=reference,
        seed=args.seed,
    )
    waveform = synthesizer.synthesize(request)
    save_waveform(args.out, waveform)
    print(f"wrote {waveform.duration:.3f} s of audio to {args.out}")
    return EXIT_OK


def _cmd_resynthesize(args) -> int:
    synthesizer = Synthesizer(args.checkpoint)
    waveform = synthesizer.resynthesize(
        load_waveform(args.audio),
        embedding_mode=args.embedding_mode.replace("-", "_"),
        seed=args.seed,
    )
    save_waveform(args.out, waveform)
    print(f"wrote {waveform.duration:.3f} s of audio to {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    config = load_config(args.config, args.set)
    pairs = []
    if args.pairs is not None:
        import csv
        import os

        base = os.path.dirname(os.path.abspath(args.pairs))
        try:
            rows = list(csv.reader(open(args.pairs, newline="", encoding="utf-8")))
        except OSError as exc:
            raise ValidationError(f"cannot read pairs file {args.pairs}: {exc}") from exc
        if not rows or [h.strip() for h in rows[0]] != [
            "utterance_id",
            "reference_path",
            "synthesis_path",
        ]:
            raise ValidationError(
                "pairs file must start with header utterance_id,reference_path,synthesis_path"
            )
        for row in rows[1:]:
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"pairs file row {row!r} must have 3 fields")
            uid, ref_path, syn_path = (v.strip() for v in row)
            pairs.append(
                (
                    uid,
                    load_waveform(os.path.join(base, ref_path)),
                    load_waveform(os.path.join(base, syn_path)),
                )
            )
    elif args.reference is not None and args.synthesis is not None:
        pairs.append(("pair", load_waveform(args.reference), load_waveform(args.synthesis)))
    else:
        raise ValidationError("evaluate needs either --pairs or both --reference and --synthesis")
    report = evaluate_pairs(pairs, config.mel)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report.to_json() + "\n")
    agg = report.aggregate
    print(
        f"{agg['count']} pair(s): log-spectral distance "
        f"{agg['log_spectral_distance_db']:.3f} dB, mel distortion "
        f"{agg['mel_distortion']:.4f}"
    )
    return EXIT_OK


def _cmd_stats(args) -> int:
    ratings = load_ratings_csv(args.ratings)
    value = relative_mushra(ratings, args.system, args.reference)
    print(f"relative MUSHRA ({args.system} vs {args.reference}): {value:.2f} %")
    if args.compare:
        comparisons = []
        for item in args.compare:
            a, sep, b = item.partition(":")
            if not sep or not a or not b:
                raise ValidationError(f"comparison {item!r} must look like SYSTEM_A:SYSTEM_B")
            comparisons.append((a, b))
        results = paired_t_holm(ratings, comparisons, alpha=args.alpha)
        print(f"paired t-tests over per-utterance means (Holm, alpha={args.alpha:g}):")
        for r in results:
            verdict = "reject" if r.reject else "keep"
            note = " (zero variance)" if r.zero_variance else ""
            print(
                f"  {r.system_a} vs {r.system_b}: n={r.n_pairs}, t={r.t_stat:.4f}, "
                f"p={r.p_value:.6f} -> {verdict}{note}"
            )
    return EXIT_OK


def _cmd_rtf(args) -> int:
    synthesizer = Synthesizer(args.checkpoint)
    report = synthesizer.measure_rtf(
        _load_mel_npy(args.mel), trials=args.trials, embedding_mode=args.embedding_mode
    )
    print(
        f"median RTF {report.median_rtf:.4f} over {report.trials} trial(s) "
        f"({report.audio_seconds:.3f} s of audio)"
    )
    return EXIT_OK


_HANDLERS = {
    "extract-features": _cmd_extract_features,
    "train-teacher": _cmd_train_teacher,
    "distill": _cmd_distill,
    "synthesize": _cmd_synthesize,
    "resynthesize": _cmd_resynthesize,
    "evaluate": _cmd_evaluate,
    "stats": _cmd_stats,
    "rtf": _cmd_rtf,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FlowvocError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # keep the exit-code contract for unexpected failures
        print(f"runtime error: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
