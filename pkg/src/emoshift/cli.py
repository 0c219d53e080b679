"""Command-line entry point: ``emoshift <subcommand> ...``.

Exit codes: 0 success, 2 input/usage error, 3 data/model error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import emotion, pipeline, synth
from .circumplex import (AFTER_STYLE, BEFORE_STYLE, EmotionTarget, map_to_plane, plot_svg)
from .midi import MidiError, parse_pitch_name, read_midi_file, write_midi_file
from .synth import WavError

log = logging.getLogger("emoshift")

EXIT_OK, EXIT_INPUT, EXIT_DATA = 0, 2, 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _load_model(path):
    try:
        return emotion.load_model(path)
    except FileNotFoundError:
        raise CliError(f"model file not found: {path}") from None
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load model {path}: {exc}", EXIT_DATA) from None


def _load_manifest(path):
    try:
        return emotion.load_manifest(path)
    except FileNotFoundError:
        raise CliError(f"manifest not found: {path}") from None
    except (ValueError, KeyError, csv.Error) as exc:
        raise CliError(f"bad manifest {path}: {exc}") from None


def _featurize(items, sample_rate):
    try:
        return emotion.featurize(items, sample_rate)
    except FileNotFoundError as exc:
        raise CliError(f"clip not found: {exc.filename}") from None
    except WavError as exc:
        raise CliError(f"unreadable clip: {exc}") from None


def _profiles(args):
    available = dict(synth.BUILTIN_PROFILES)
    if getattr(args, "profile_file", None):
        try:
            text = Path(args.profile_file).read_text()
            for p in synth.parse_profiles(text):
                available[p.name] = p
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read profile file: {exc}") from None
    names = [n.strip() for n in args.profiles.split(",") if n.strip()] if args.profiles else sorted(available)
    missing = [n for n in names if n not in available]
    if missing:
        raise CliError(f"unknown profile(s): {', '.join(missing)}")
    return [available[n] for n in names], available


def _target(text):
    try:
        target = EmotionTarget.parse(text)
        target.coordinates(1.0)
        return target
    except ValueError as exc:
        raise CliError(f"invalid target {text!r}: {exc}") from None


def _pitch(text):
    try:
        return int(text) if text.strip().lstrip("-").isdigit() else parse_pitch_name(text)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _read_midi(path):
    try:
        return read_midi_file(path)
    except FileNotFoundError:
        raise CliError(f"MIDI file not found: {path}") from None
    except MidiError as exc:
        raise CliError(f"cannot parse {path}: {exc}") from None


def _outdir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _probs_line(probs):
    return "  ".join(f"Q{i + 1}={p:.4f}" for i, p in enumerate(probs))


# --- subcommands -----------------------------------------------------------

def cmd_train(args):
    items = _load_manifest(args.manifest)
    config = emotion.TrainingConfig(args.epochs, args.batch_size, args.learning_rate, args.seed,
                                    args.validation_fraction)
    feats = _featurize(items, args.sample_rate)
    try:
        model = emotion.train(items, config, features=feats, v_threshold=args.v_threshold,
                              a_threshold=args.a_threshold)
    except emotion.TrainingError as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    out = _outdir(args.out)
    emotion.save_model(model, out / "model.json")
    emotion.write_loss_curve(model, out / "loss.csv")
    curve = model.metadata["loss_curve"]
    print(f"trained on {model.metadata['n_train']} clips "
          f"({model.metadata['n_validation']} held out); "
          f"train loss {curve[0][1]:.4f} -> {curve[-1][1]:.4f}")
    print(f"wrote {out / 'model.json'} and {out / 'loss.csv'}")
    return EXIT_OK


def cmd_eval(args):
    items = _load_manifest(args.manifest)
    model = _load_model(args.model)
    feats = _featurize(items, args.sample_rate)
    acc, confusion = emotion.evaluate(model, items, features=feats,
                                      v_threshold=args.v_threshold, a_threshold=args.a_threshold)
    print(emotion.format_confusion(acc, confusion))
    if args.out:
        out = _outdir(args.out)
        with open(out / "confusion.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["true", "Q1", "Q2", "Q3", "Q4"])
            for i, row in enumerate(confusion):
                writer.writerow([f"Q{i + 1}", *(int(v) for v in row)])
        (out / "accuracy.txt").write_text(f"{acc!r}\n")
    return EXIT_OK


def cmd_analyze(args):
    model = _load_model(args.model)
    path = Path(args.input)
    if not path.exists():
        raise CliError(f"input not found: {path}")
    if path.suffix.lower() in (".mid", ".midi"):
        song = _read_midi(path)
        if not song.notes:
            raise CliError(f"{path} contains no notes")
        profile = _profiles(argparse.Namespace(profiles=args.profile, profile_file=args.profile_file))[0][0]
        clip = synth.render(song, None, profile, profile, args.sample_rate)
    else:
        try:
            clip = synth.read_wav_file(path, args.sample_rate)
        except WavError as exc:
            raise CliError(f"cannot read {path}: {exc}") from None
    try:
        probs = pipeline.score_clip(model, clip)
    except ValueError as exc:
        raise CliError(f"cannot analyse {path}: {exc}", EXIT_DATA) from None
    quadrant = emotion.predict_quadrant(probs)
    point = map_to_plane(probs, args.radius)
    print(_probs_line(probs))
    print(f"quadrant: {quadrant.name} ({quadrant.mood})  point: ({point.x:.4f}, {point.y:.4f})")
    out = _outdir(args.out)
    (out / "analysis.svg").write_text(plot_svg([(path.name, point, BEFORE_STYLE)]))
    (out / "analysis.json").write_text(json.dumps({
        "input": str(path), "probs": list(probs), "quadrant": quadrant.name,
        "point": [point.x, point.y], "radius": args.radius}, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _run_sweep(args, melody, name, target, model, profiles):
    lo, hi = _pitch(args.low), _pitch(args.high)
    if lo > hi:
        raise CliError("--low must not be above --high")
    source = args.source_profile if args.source_profile in [p.name for p in profiles] else None
    try:
        return pipeline.sweep(melody, (lo, hi), profiles, model, target, args.seed,
                              args.workers or pipeline.default_workers(), radius=args.radius,
                              sample_rate_hz=args.sample_rate, melody_name=name,
                              source_profile=source)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATA) from None


def cmd_transform(args):
    target = _target(args.target)
    model = _load_model(args.model)
    melody = _read_midi(args.midi)
    if not melody.notes:
        raise CliError(f"{args.midi} contains no notes")
    profiles, _ = _profiles(args)
    report = _run_sweep(args, melody, Path(args.midi).name, target, model, profiles)
    if report.best_index is None:
        raise CliError("every candidate failed; see report", EXIT_DATA)
    best = report.best
    profile = next(p for p in profiles if p.name == best.profile_name)
    _, clip, combined = pipeline.transform_once(melody, best.semitone_offset, profile, model,
                                                args.seed, sample_rate_hz=args.sample_rate)
    out = _outdir(args.out)
    write_midi_file(combined, out / "best.mid")
    synth.write_wav_file(clip, out / "best.wav")
    (out / "report.json").write_text(pipeline.reports_to_json([report]))
    (out / "report.csv").write_text(pipeline.report_to_csv(report))
    svg = plot_svg([(f"before ({report.source_profile})", report.source_point, BEFORE_STYLE),
                    (f"after ({best.target_tonic}, {best.profile_name})", best.point_after, AFTER_STYLE)],
                   target)
    (out / "circumplex.svg").write_text(svg)
    print(f"key {report.detected_key}; target {target.describe()}")
    print(f"before [{report.source_profile}]: {_probs_line(report.source_probs)}  "
          f"distance {report.source_distance:.4f}")
    print(f"best   [{best.target_tonic}, offset {best.semitone_offset:+d}, {best.profile_name}]: "
          f"{_probs_line(best.probs_after)}  distance {best.distance_to_target:.4f}")
    print(f"wrote best.mid, best.wav, circumplex.svg, report.json, report.csv to {out}")
    return EXIT_OK


def cmd_sweep(args):
    target = _target(args.target)
    model = _load_model(args.model)
    profiles, _ = _profiles(args)
    out = _outdir(args.out)
    reports = []
    for path in args.midi:
        melody = _read_midi(path)
        if not melody.notes:
            raise CliError(f"{path} contains no notes")
        report = _run_sweep(args, melody, Path(path).name, target, model, profiles)
        reports.append(report)
        (out / f"{Path(path).stem}.csv").write_text(pipeline.report_to_csv(report))
    (out / "sweep.json").write_text(pipeline.reports_to_json(reports))
    rows = sum(len(r.candidates) for r in reports)
    failed = sum(not c.ok for r in reports for c in r.candidates)
    print(f"{rows} candidate rows ({failed} failed) across {len(reports)} melodies -> {out / 'sweep.json'}")
    return EXIT_OK


def cmd_synth_corpus(args):
    if args.n < 1:
        raise CliError("--n must be >= 1")
    items = corpus_mod.generate_synthetic_corpus(args.n, args.seed, args.bars, args.sample_rate)
    manifest = corpus_mod.write_corpus(items, args.out)
    print(f"wrote {len(items)} clips and {manifest}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="emoshift", description=(
        "Shift the perceived emotion of a MIDI melody by sweeping transpositions and "
        "instrument profiles, scored by a four-quadrant emotion classifier."))
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sample_rate=True):
        if sample_rate:
            p.add_argument("--sample-rate", type=int, default=synth.DEFAULT_SAMPLE_RATE,
                           help="analysis/synthesis rate in Hz (default 16000)")

    def thresholds(p):
        p.add_argument("--v-threshold", type=float, default=emotion.DEFAULT_THRESHOLD,
                       help="valence split for path,valence,arousal manifests (default 5.0)")
        p.add_argument("--a-threshold", type=float, default=emotion.DEFAULT_THRESHOLD,
                       help="arousal split for path,valence,arousal manifests (default 5.0)")

    def sweep_flags(p):
        p.add_argument("--model", required=True, help="classifier file from 'train'")
        p.add_argument("--target", required=True,
                       help="quadrant (Q1..Q4, happy/angry/sad/calm) or 'valence,arousal'")
        p.add_argument("--low", default="C0", help="lowest tonic target (name or MIDI number, default C0)")
        p.add_argument("--high", default="B8", help="highest tonic target (default B8)")
        p.add_argument("--profiles", default=None,
                       help="comma-separated profile names (default: all built-ins)")
        p.add_argument("--profile-file", default=None, help="INI file with extra profiles")
        p.add_argument("--source-profile", default="piano-like",
                       help="profile used for the reference 'before' point (default piano-like)")
        p.add_argument("--seed", type=int, default=0, help="accompaniment seed (default 0)")
        p.add_argument("--workers", type=int, default=0,
                       help="parallel workers (default: available CPUs)")
        p.add_argument("--radius", type=float, default=1.0, help="circumplex radius (default 1.0)")
        p.add_argument("--out", required=True, help="output directory")
        common(p)

    p = sub.add_parser("train", help="train a classifier from a CSV manifest")
    p.add_argument("--manifest", required=True, help="CSV: path,quadrant or path,valence,arousal")
    p.add_argument("--out", required=True, help="output directory for model.json and loss.csv")
    p.add_argument("--epochs", type=int, default=10, help="default 10")
    p.add_argument("--batch-size", type=int, default=8, help="default 8")
    p.add_argument("--learning-rate", type=float, default=emotion.TrainingConfig.learning_rate,
                   help="SGD step size (default 0.05)")
    p.add_argument("--seed", type=int, default=0, help="default 0")
    p.add_argument("--validation-fraction", type=float, default=0.2, help="default 0.2")
    thresholds(p)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy and confusion matrix on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="also write confusion.csv and accuracy.txt here")
    thresholds(p)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="classify a WAV or MIDI file and plot it")
    p.add_argument("input", help=".wav or .mid file")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profile", default="piano-like", help="profile for MIDI input (default piano-like)")
    p.add_argument("--profile-file", default=None)
    p.add_argument("--radius", type=float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("transform", help="find and write the candidate closest to a target emotion")
    p.add_argument("midi")
    sweep_flags(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("sweep", help="score every transposition x profile candidate")
    p.add_argument("midi", nargs="+")
    sweep_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth-corpus", help="generate a synthetic labelled corpus")
    p.add_argument("--n", type=int, required=True, help="clips per quadrant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bars", type=int, default=4)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_synth_corpus)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"emoshift {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
