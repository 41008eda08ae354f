"""Command-line front end: ``gen``, ``track``, ``eval`` and ``bench``."""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import ingest
from .bench import emit_report, format_reports, run_benchmark
from .metrics import UndefinedMetricError, evaluate
from .scenario import (
    ScenarioError,
    generate,
    load_spec,
    misclassification_scenario,
    occlusion_scenario,
    table1_suite,
)
from .tracker import ConfigError, TrackerConfig, run_sequence

PRESETS = {
    "occlusion": occlusion_scenario,
    "misclassification": misclassification_scenario,
}

# exit codes
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CONFIG = 4
EXIT_METRIC = 5
EXIT_IO = 6


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _existing_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {p}", EXIT_INPUT)
    return p


def _writable_parent(path: str, what: str) -> Path:
    p = Path(path)
    if p.parent and not p.parent.is_dir():
        raise CliError(f"directory for {what} does not exist: {p.parent}", EXIT_IO)
    return p


def _cmd_gen(args) -> int:
    if args.spec_file.startswith("preset:"):
        name = args.spec_file.split(":", 1)[1]
        if name not in PRESETS:
            raise CliError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}", EXIT_USAGE)
        if name == "occlusion" and args.seed is not None:
            spec = occlusion_scenario(seed=args.seed)
        else:
            spec = PRESETS[name]()
    else:
        spec = load_spec(_existing_file(args.spec_file, "scenario file"))
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    bundle = ingest.bundle_from_sequence(generate(spec), image_size=spec.image_size)
    out = ingest.write_sequence(bundle, args.out_dir)
    print(f"wrote {bundle.frame_count} frames, {spec.num_objects} objects to {out}")
    return 0


def _cmd_track(args) -> int:
    seq_dir = Path(args.sequence_dir)
    if not seq_dir.is_dir():
        raise CliError(f"sequence directory not found: {seq_dir}", EXIT_INPUT)
    config = TrackerConfig()
    if args.config:
        config = TrackerConfig.from_file(_existing_file(args.config, "config file"))
    if args.parallel:
        config = config.replace(parallel=True)
    if args.iou_only:
        config = config.replace(stage2_enabled=False)
    out = _writable_parent(args.out, "results file")
    bundle = ingest.read_sequence(seq_dir)
    results = run_sequence(bundle.detections_per_frame, config)
    ingest.write_results(results, out)
    n_out = sum(len(r.outputs) for r in results)
    print(f"tracked {bundle.frame_count} frames, {n_out} confirmed outputs -> {out}")
    return 0


def _cmd_eval(args) -> int:
    results = ingest.load_results(_existing_file(args.results_file, "results file"))
    gt_path = Path(args.gt_file)
    if gt_path.is_dir():
        gt_path = gt_path / ingest.GROUND_TRUTH_FILE
    gt = ingest.load_ground_truth(_existing_file(str(gt_path), "ground-truth file")).ground_truth
    frames = None
    if args.first_frame is not None:
        frames = range(args.first_frame, len(gt) + 1)
    metrics = evaluate(results, gt, iou_threshold=args.threshold, frames=frames)
    print(metrics.summary())
    if args.out:
        metrics.to_csv(_writable_parent(args.out, "metrics file"))
    return 0


def _cmd_bench(args) -> int:
    if args.suite == "table1":
        specs = table1_suite(num_frames=args.frames, seed=args.seed or 0)
    else:
        paths = args.suite.split(",")
        specs = [load_spec(_existing_file(p, "scenario file")) for p in paths]
    if args.reps < 1:
        raise CliError(f"--reps must be >= 1, got {args.reps}", EXIT_USAGE)
    out = _writable_parent(args.out, "report file")
    config = TrackerConfig()
    if args.config:
        config = TrackerConfig.from_file(_existing_file(args.config, "config file"))
    config = config.replace(parallel=args.parallel)
    reports = run_benchmark(specs, repetitions=args.reps, config=config, warmup=args.warmup)
    emit_report(reports, out)
    print(format_reports(reports))
    print(f"wrote {len(reports)} rows -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="classtrack", description="Class-partitioned multi-object tracker")
    sub = parser.add_subparsers(dest="command", metavar="{gen,track,eval,bench}")

    p = sub.add_parser("gen", help="generate a synthetic sequence directory")
    p.add_argument("spec_file", help="JSON scenario file, or preset:occlusion / preset:misclassification")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("track", help="run the tracker over a sequence directory")
    p.add_argument("sequence_dir")
    p.add_argument("--config", help="INI file with a [tracker] section")
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--parallel", action="store_true", help="one worker thread per class")
    p.add_argument("--iou-only", action="store_true", help="disable the appearance stage")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval", help="score results against ground truth")
    p.add_argument("results_file")
    p.add_argument("gt_file", help="ground-truth CSV or a sequence directory")
    p.add_argument("--threshold", type=float, default=0.5, help="IoU needed for a match")
    p.add_argument("--first-frame", type=int, default=None, help="ignore frames before this one")
    p.add_argument("--out", help="write metrics as CSV")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="time partitioned vs monolithic matching")
    p.add_argument("--suite", default="table1", help="'table1' or comma-separated scenario files")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--frames", type=int, default=100, help="frames per table1 scenario")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="INI file with a [tracker] section")
    p.add_argument("--parallel", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--out", required=True, help="report CSV")
    p.set_defaults(func=_cmd_bench)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 on usage errors
        return EXIT_USAGE if exc.code else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error: no subcommand given", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ingest.IngestError as exc:
        print(f"error: bad input data: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UndefinedMetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_METRIC
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
