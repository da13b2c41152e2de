"""Command-line interface: ``oadf <command> ...``.

Stream directories hold ``*.skel`` files (skeleton stream format with an
annotation block); context directories hold ``*.ctx`` files with the same
stem.  Exit codes: 0 success, 2 input error, 3 format error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .exceptions import FormatError, InputError
from .streams import (SynthConfig, iter_synthetic, load_context_matrix, load_skeleton_stream,
                      parse_frame_line, parse_stream_header, write_context_matrix,
                      write_skeleton_stream)

log = logging.getLogger("oadforest")

EXIT_OK, EXIT_INPUT, EXIT_FORMAT = 0, 2, 3
STREAM_SUFFIX, CONTEXT_SUFFIX = ".skel", ".ctx"


def _toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None


def _stream_files(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"{directory} is not a directory")
    files = sorted(directory.glob("*" + STREAM_SUFFIX))
    if not files:
        raise InputError(f"no {STREAM_SUFFIX} files in {directory}")
    return files


def _load_labeled(directory, context_dir=None):
    streams, truths, contexts = [], [], []
    for path in _stream_files(directory):
        stream, gt = load_skeleton_stream(path)
        if gt is None:
            raise InputError(f"{path} has no #segments annotation block")
        streams.append(stream)
        truths.append(gt)
        if context_dir is not None:
            contexts.append(load_context_matrix(Path(context_dir) / (path.stem + CONTEXT_SUFFIX), stream))
    return streams, truths, (contexts if context_dir is not None else None)


def cmd_synth(args):
    raw = _toml(args.config) if args.config else {}
    raw = dict(raw.get("synth", raw))
    n_streams = int(raw.pop("n_streams", 1))
    for key in ("frames_per_segment_range", "background_range"):
        if key in raw:
            raw[key] = tuple(raw[key])
    if "ambiguity_pairs" in raw:
        raw["ambiguity_pairs"] = tuple(tuple(p) for p in raw["ambiguity_pairs"])
    try:
        config = SynthConfig(**raw)
    except TypeError as exc:
        raise InputError(f"bad synth config: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, (stream, ctx, gt) in enumerate(iter_synthetic(config, n_streams)):
        stem = f"stream{i:03d}"
        write_skeleton_stream(stream, out / (stem + STREAM_SUFFIX), gt)
        write_context_matrix(ctx, out / (stem + CONTEXT_SUFFIX))
    print(f"wrote {n_streams} streams to {out}")
    return EXIT_OK


def cmd_train(args):
    from .detector import OnlineActionDetector
    from .forest import ContextForestClassifier
    from .serialization import save_model

    forest = ContextForestClassifier(n_trees=args.trees, max_depth=args.max_depth,
                                     min_samples=args.min_samples, n_candidates=args.candidates,
                                     mode=args.mode, random_state=args.seed, n_jobs=args.jobs)
    needs_contexts = forest._params().uses_spatial
    context_dir = args.contexts or (args.streams if needs_contexts else None)
    streams, truths, contexts = _load_labeled(args.streams, context_dir if needs_contexts else None)
    model = OnlineActionDetector(forest, deriv_lag=args.deriv_lag, beta=args.beta)
    model.fit(streams, truths, contexts)
    save_model(model, args.model)
    print(f"trained {args.trees} trees ({args.mode}) on {sum(s.n_frames for s in streams)} frames; "
          f"beta={model.beta_:.2f}")
    return EXIT_OK


def cmd_calibrate(args):
    from .serialization import load_model, save_model

    model = load_model(args.model)
    streams, truths, _ = _load_labeled(args.streams)
    beta = model.calibrate(streams, truths)
    save_model(model, args.model)
    print(f"beta={beta:.2f}")
    return EXIT_OK


def _require_beta(model):
    if getattr(model, "beta_", None) is None:
        raise InputError("model has no calibrated beta; run `calibrate` first")


def cmd_detect(args):
    from .serialization import load_model

    model = load_model(args.model)
    _require_beta(model)
    out = sys.stdout
    if args.stdin:
        return _detect_stdin(model, sys.stdin, out)
    stream, _ = load_skeleton_stream(args.stream)
    result = model.detect(stream)
    for t, (label, loc) in enumerate(zip(result.labels, result.locs)):
        out.write(f"{t} {label} {loc:.6f}\n")
    _write_segments(out, result.segments)
    return EXIT_OK


def _write_segments(out, segments):
    out.write("#segments\n")
    for seg in segments:
        out.write(f"{seg.start} {seg.end} {seg.class_id} {seg.score:.6f}\n")
    out.flush()


def _detect_stdin(model, lines, out):
    header = lines.readline()
    n_joints, _ = parse_stream_header(header, 1)
    if n_joints != model.n_joints_:
        raise InputError(f"stream has {n_joints} joints, model expects {model.n_joints_}")
    online = model.streaming()
    for lineno, line in enumerate(lines, start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            break
        _, joints = parse_frame_line(line, n_joints, lineno)
        t, label, loc = online.push(joints)
        out.write(f"{t} {label} {loc:.6f}\n")
        out.flush()
    _write_segments(out, online.close())
    return EXIT_OK


def cmd_eval(args):
    from .metrics import boundary_scores, event_fscore, frame_fscore, gt_anchors
    from .serialization import load_model

    model = load_model(args.model)
    _require_beta(model)
    streams, truths, _ = _load_labeled(args.streams)
    pred_all, gt_all = [], []
    matched = n_pred = n_gt = 0
    sl = el = 0.0
    n_actions = 0
    for stream, gt in zip(streams, truths):
        result = model.detect(stream)
        pred_all.append(result.labels)
        gt_all.append(gt.labels())
        ev = event_fscore(result.segments, gt_anchors(gt), args.delta_ms, stream.frame_rate)
        matched += len(ev.matches)
        n_pred += sum(1 for s in result.segments if s.class_id != 0)
        n_gt += len(gt.actions)
        b = boundary_scores(result.segments, gt.segments)
        sl += b.sl * len(gt.actions)
        el += b.el * len(gt.actions)
        n_actions += len(gt.actions)
    frame = frame_fscore(np.concatenate(pred_all), np.concatenate(gt_all),
                         include_background=args.include_background)
    precision = matched / n_pred if n_pred else 0.0
    recall = matched / n_gt if n_gt else 0.0
    event_f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    sl = sl / n_actions if n_actions else 0.0
    el = el / n_actions if n_actions else 0.0

    print(f"streams: {len(streams)}  frames: {sum(s.n_frames for s in streams)}  beta: {model.beta_:.2f}")
    print(f"frame F1 (overall): {frame.overall_f1:.4f}")
    for c, f1 in sorted(frame.per_class_f1.items()):
        print(f"  class {c}: {f1:.4f}")
    print(f"event F1 @ {args.delta_ms:g} ms: {event_f1:.4f}  (P {precision:.4f}, R {recall:.4f})")
    print(f"SL: {sl:.4f}  EL: {el:.4f}")
    print("--")
    print(f"frame_f1={frame.overall_f1:.6f}")
    for c, f1 in sorted(frame.per_class_f1.items()):
        print(f"frame_f1_class_{c}={f1:.6f}")
    print(f"event_f1={event_f1:.6f}")
    print(f"event_precision={precision:.6f}")
    print(f"event_recall={recall:.6f}")
    print(f"delta_ms={args.delta_ms:g}")
    print(f"sl={sl:.6f}")
    print(f"el={el:.6f}")
    return EXIT_OK


def cmd_bench(args):
    from .bench import benchmark_latency, sweep_trees
    from .serialization import load_model

    model = load_model(args.model)
    _require_beta(model)
    stream, gt = load_skeleton_stream(args.stream)
    if args.sweep_trees:
        counts = [int(v) for v in args.sweep_trees.split(",") if v.strip()]
        if args.streams:
            streams, truths, _ = _load_labeled(args.streams)
            evaluation = list(zip(streams, truths))
        elif gt is not None:
            evaluation = [(stream, gt)]
        else:
            raise InputError("--sweep-trees needs annotated streams (--streams or an annotated --stream)")
        try:
            rows = sweep_trees(model, counts, evaluation, stream, args.reps)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        print("n_trees accuracy mean_ms")
        for row in rows:
            print(f"{row.n_trees} {row.accuracy:.6f} {row.mean_ms:.6f}")
        return EXIT_OK
    stats = benchmark_latency(model, stream, args.reps)
    print(f"frames={stats.n_frames}")
    print(f"mean_ms={stats.mean_ms:.6f}")
    print(f"median_ms={stats.median_ms:.6f}")
    print(f"p99_ms={stats.p99_ms:.6f}")
    print(f"max_comparisons={stats.max_comparisons}")
    print(f"comparison_bound={stats.comparison_bound}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="oadf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic streams, contexts and annotations")
    p.add_argument("--config", help="TOML file with generator settings")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a detector model")
    p.add_argument("--streams", required=True)
    p.add_argument("--contexts", help="directory of .ctx files (defaults to --streams)")
    p.add_argument("--mode", choices=["rf", "rf+t", "rf+st"], default="rf+st")
    p.add_argument("--trees", type=int, default=50)
    p.add_argument("--max-depth", type=int, default=100)
    p.add_argument("--min-samples", type=int, default=1)
    p.add_argument("--candidates", type=int, default=64)
    p.add_argument("--deriv-lag", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, help="fix beta instead of calibrating on the training streams")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="select beta on labeled streams and store it in the model")
    p.add_argument("--model", required=True)
    p.add_argument("--streams", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="per-frame labels and detected segments")
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--stream")
    src.add_argument("--stdin", action="store_true")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="frame, event and boundary scores")
    p.add_argument("--model", required=True)
    p.add_argument("--streams", required=True)
    p.add_argument("--delta-ms", type=float, default=333.0)
    p.add_argument("--include-background", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-frame latency and tree-count sweeps")
    p.add_argument("--model", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--sweep-trees", help="comma-separated tree counts, e.g. 1,5,10,25,50")
    p.add_argument("--streams", help="annotated streams for sweep accuracy")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (InputError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
