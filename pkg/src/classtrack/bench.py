"""Monolithic vs class-partitioned matching benchmark.

Every repetition tracks the whole sequence twice: once with per-class
matching and once with the single-matrix baseline. Only cost-matrix
population and the assignment solves are timed (Kalman filtering and I/O are
excluded). Per-class times are aggregated per frame, then over frames and
repetitions; the partitioned match time of a frame is its slowest class,
i.e. the wall-clock of an ideal one-core-per-class execution.
"""
from __future__ import annotations

import csv
import gc
import time
from dataclasses import dataclass, field

import numpy as np

from .assignment import step_count_model
from .scenario import ScenarioSpec, generate
from .tracker import TrackerConfig, run_sequence

__all__ = ["TimingReport", "run_benchmark", "emit_report", "read_report", "format_reports", "REPORT_COLUMNS"]


@dataclass
class TimingReport:
    scenario_label: tuple[int, ...]
    per_class_times: dict[int, tuple[float, float]]
    partitioned_total: float
    partitioned_std: float
    partitioned_sequential: float
    monolithic_total: tuple[float, float]
    step_counts: tuple[int, int, int]
    stage2_invocations: int
    repetitions: int
    outputs_equal: bool
    pipeline_ms: dict[str, float] = field(default_factory=dict)

    @property
    def speedup(self) -> float:
        return self.monolithic_total[0] / self.partitioned_total if self.partitioned_total else float("inf")


def _mean_std(samples) -> tuple[float, float]:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        return 0.0, 0.0
    return float(arr.mean()), float(arr.std())


def _timed_run(detections, config):
    # like timeit: a collection pause inside a sub-millisecond solve would
    # dominate the sample, so collect up front and keep gc off while timing
    gc.collect()
    enabled = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter()
        results = run_sequence(detections, config)
        elapsed = time.perf_counter() - t0
    finally:
        if enabled:
            gc.enable()
    return results, elapsed


@dataclass
class _Samples:
    per_class: dict[int, list[float]] = field(default_factory=dict)
    frame_max: list[float] = field(default_factory=list)
    frame_sum: list[float] = field(default_factory=list)
    monolithic: list[float] = field(default_factory=list)
    wall: dict[str, float] = field(default_factory=lambda: {"partitioned": 0.0, "monolithic": 0.0})
    outputs_equal: bool = True
    stage2: int = 0


def run_benchmark(
    specs: list[ScenarioSpec],
    repetitions: int = 50,
    config: TrackerConfig | None = None,
    warmup: int = 5,
    pipeline: bool = False,
    progress=None,
) -> list[TimingReport]:
    """Time both matchers on every scenario; values are milliseconds.

    Scenarios are interleaved within each repetition so slow drift in machine
    speed spreads evenly over them instead of biasing whichever ran last.
    ``config.parallel`` selects threaded per-class workers for the
    partitioned runs. With ``pipeline`` the whole-sequence wall-clock of both
    modes is recorded as well (informational only).
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    base = config or TrackerConfig()
    partitioned_cfg = base.replace(matcher="partitioned")
    monolithic_cfg = base.replace(matcher="monolithic", parallel=False)
    sequences = [generate(spec).detections for spec in specs]
    for _ in range(warmup):
        for detections in sequences:
            run_sequence(detections, partitioned_cfg)
            run_sequence(detections, monolithic_cfg)

    samples = [_Samples() for _ in specs]
    for rep in range(repetitions):
        for spec, detections, acc in zip(specs, sequences, samples):
            part, t_part = _timed_run(detections, partitioned_cfg)
            mono, t_mono = _timed_run(detections, monolithic_cfg)
            acc.wall["partitioned"] += t_part
            acc.wall["monolithic"] += t_mono
            for r in part:
                diag = r.diagnostics
                if not diag.per_class:
                    continue
                for class_id, cd in diag.per_class.items():
                    acc.per_class.setdefault(class_id, []).append(cd.match_seconds * 1e3)
                acc.frame_max.append(diag.match_seconds * 1e3)
                acc.frame_sum.append(diag.match_seconds_total * 1e3)
            acc.monolithic.extend(
                r.diagnostics.match_seconds * 1e3 for r in mono if r.diagnostics.monolithic_shape != (0, 0)
            )
            if rep == 0:
                acc.outputs_equal = [r.outputs for r in part] == [r.outputs for r in mono]
                acc.stage2 = sum(r.diagnostics.stage2_invocations for r in part)
            if progress is not None:
                progress(spec, rep)

    reports = []
    for spec, acc in zip(specs, samples):
        part_mean, part_std = _mean_std(acc.frame_max)
        reports.append(TimingReport(
            scenario_label=tuple(spec.class_counts),
            per_class_times={c: _mean_std(v) for c, v in sorted(acc.per_class.items())},
            partitioned_total=part_mean,
            partitioned_std=part_std,
            partitioned_sequential=_mean_std(acc.frame_sum)[0],
            monolithic_total=_mean_std(acc.monolithic),
            step_counts=step_count_model(spec.class_counts),
            stage2_invocations=acc.stage2,
            repetitions=repetitions,
            outputs_equal=acc.outputs_equal,
            pipeline_ms={k: v * 1e3 / repetitions for k, v in acc.wall.items()} if pipeline else {},
        ))
    return reports


def _num_classes(reports) -> int:
    return max((len(r.scenario_label) for r in reports), default=0)


def REPORT_COLUMNS(num_classes: int) -> list[str]:
    cols = ["scenario"]
    for c in range(num_classes):
        cols += [f"class{c}_ms", f"class{c}_std_ms"]
    cols += [
        "partitioned_ms", "partitioned_std_ms", "partitioned_sequential_ms",
        "monolithic_ms", "monolithic_std_ms",
        "steps_monolithic", "steps_partitioned_sequential", "steps_partitioned_parallel",
        "stage2_invocations", "repetitions", "outputs_equal",
    ]
    return cols


def emit_report(reports: list[TimingReport], path) -> None:
    """One CSV row per scenario, laid out like the scaling table."""
    m = _num_classes(reports)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS(m))
        for r in reports:
            row = ["(" + ",".join(str(c) for c in r.scenario_label) + ")"]
            for c in range(m):
                mean, std = r.per_class_times.get(c, (0.0, 0.0))
                row += [f"{mean:.4f}", f"{std:.4f}"]
            row += [
                f"{r.partitioned_total:.4f}", f"{r.partitioned_std:.4f}",
                f"{r.partitioned_sequential:.4f}",
                f"{r.monolithic_total[0]:.4f}", f"{r.monolithic_total[1]:.4f}",
                *r.step_counts, r.stage2_invocations, r.repetitions, int(r.outputs_equal),
            ]
            writer.writerow(row)


def read_report(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def format_reports(reports: list[TimingReport]) -> str:
    lines = [f"{'scenario':<12}{'partitioned ms':>16}{'monolithic ms':>16}{'speedup':>10}{'steps':>18}"]
    for r in reports:
        label = "(" + ",".join(str(c) for c in r.scenario_label) + ")"
        steps = "/".join(str(s) for s in r.step_counts)
        lines.append(
            f"{label:<12}{r.partitioned_total:>16.4f}{r.monolithic_total[0]:>16.4f}"
            f"{r.speedup:>10.2f}{steps:>18}"
        )
    return "\n".join(lines)
