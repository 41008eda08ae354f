"""Class-partitioned tracking-by-detection with a two-stage cascade.

Each frame the live tracks and accepted detections are split by class id and
every class is matched independently:

1. geometric stage: CIoU cost between Kalman-predicted boxes and detections,
   padded and solved; pairs above ``stage1_gate`` are rejected;
2. appearance stage: the leftovers that carry embeddings are matched on the
   max-cosine cost against each track's feature history, gated by
   ``stage2_gate``.

Per-class workers can run on a thread pool. Track creation, deletion and id
assignment happen afterwards in a single-threaded merge, so parallel and
sequential runs give identical results.

``matcher="monolithic"`` solves one matrix over all classes instead, with
cross-class pairs priced at the dummy value; it is the baseline used by the
benchmark.
"""
from __future__ import annotations

import configparser
import dataclasses
import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import motion
from .appearance import FeatureHistory, cosine_cost_matrix
from .assignment import pad_costs, pad_costs_masked, solve_dense
from .geometry import BoundingBox, ciou_cost_matrix, iou_cost_matrix

__all__ = [
    "Detection",
    "Track",
    "TrackStatus",
    "TrackerConfig",
    "ConfigError",
    "SequencingError",
    "ClassDiagnostics",
    "FrameDiagnostics",
    "FrameResult",
    "MatchOutcome",
    "Tracker",
    "partition_by_class",
    "match_class",
    "run_sequence",
]


class ConfigError(ValueError):
    pass


class SequencingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    class_id: int
    confidence: float = 1.0
    embedding: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"


@dataclass(eq=False)
class Track:
    id: int
    class_id: int
    state: motion.KalmanState
    features: FeatureHistory
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    time_since_update: int = 0
    age: int = 1

    @property
    def box(self) -> BoundingBox:
        return motion.to_box(self.state)

    @property
    def is_confirmed(self) -> bool:
        return self.status is TrackStatus.CONFIRMED


_BOOL_KEYS = ("parallel", "stage2_enabled")
_MATCHERS = ("partitioned", "monolithic")
_STAGE1_METRICS = ("ciou", "iou")


@dataclass(frozen=True)
class TrackerConfig:
    stage1_gate: float = 1.0
    stage2_gate: float = 0.4
    n_init: int = 3
    max_age: int = 30
    h: int = 50
    k: float = 1.0
    min_confidence: float = 0.5
    parallel: bool = False
    stage2_enabled: bool = True
    matcher: str = "partitioned"
    stage1_metric: str = "ciou"
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160

    def __post_init__(self):
        problems = []
        if not 0 < self.stage1_gate <= 2:
            problems.append(f"stage1_gate must lie in (0, 2], got {self.stage1_gate}")
        if not 0 < self.stage2_gate <= 2:
            problems.append(f"stage2_gate must lie in (0, 2], got {self.stage2_gate}")
        if self.n_init < 1:
            problems.append(f"n_init must be >= 1, got {self.n_init}")
        if self.max_age < 1:
            problems.append(f"max_age must be >= 1, got {self.max_age}")
        if self.h < 1:
            problems.append(f"h must be >= 1, got {self.h}")
        if not self.k > 0:
            problems.append(f"k must be positive, got {self.k}")
        if not 0 <= self.min_confidence < 1:
            problems.append(f"min_confidence must lie in [0, 1), got {self.min_confidence}")
        if self.matcher not in _MATCHERS:
            problems.append(f"matcher must be one of {_MATCHERS}, got {self.matcher!r}")
        if self.stage1_metric not in _STAGE1_METRICS:
            problems.append(f"stage1_metric must be one of {_STAGE1_METRICS}, got {self.stage1_metric!r}")
        if not (self.std_weight_position > 0 and self.std_weight_velocity > 0):
            problems.append("Kalman std weights must be positive")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def kalman(self) -> motion.KalmanParams:
        return motion.KalmanParams(self.std_weight_position, self.std_weight_velocity)

    def replace(self, **changes) -> "TrackerConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: dict) -> "TrackerConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(fields))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        parsed = {}
        for key, raw in values.items():
            default = fields[key].default
            try:
                if key in _BOOL_KEYS:
                    parsed[key] = _parse_bool(raw)
                elif isinstance(default, int):
                    parsed[key] = int(raw)
                elif isinstance(default, float):
                    parsed[key] = float(raw)
                else:
                    parsed[key] = str(raw).strip()
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
        return cls(**parsed)

    @classmethod
    def from_file(cls, path) -> "TrackerConfig":
        """Read an INI file whose ``[tracker]`` section holds field = value pairs."""
        parser = configparser.ConfigParser()
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not parser.has_section("tracker"):
            raise ConfigError(f"{path} has no [tracker] section")
        return cls.from_mapping(dict(parser["tracker"]))

    def to_file(self, path) -> None:
        parser = configparser.ConfigParser()
        parser["tracker"] = {f.name: str(getattr(self, f.name)) for f in dataclasses.fields(self)}
        with open(path, "w") as fh:
            parser.write(fh)


def _parse_bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


@dataclass
class ClassDiagnostics:
    class_id: int
    stage1_shape: tuple[int, int] = (0, 0)
    stage2_shape: tuple[int, int] = (0, 0)
    stage2_invoked: bool = False
    cosine_evaluations: int = 0
    match_seconds: float = 0.0

    @property
    def stage1_dim(self) -> int:
        return max(self.stage1_shape)


@dataclass
class FrameDiagnostics:
    per_class: dict[int, ClassDiagnostics] = field(default_factory=dict)
    class_shapes: dict[int, tuple[int, int]] = field(default_factory=dict)
    monolithic_shape: tuple[int, int] = (0, 0)
    stage2_invocations: int = 0
    cosine_evaluations: int = 0
    # wall-clock of matrix population + solve: slowest worker / all workers
    match_seconds: float = 0.0
    match_seconds_total: float = 0.0


@dataclass
class FrameResult:
    frame_index: int
    outputs: list[tuple[int, int, BoundingBox]]
    diagnostics: FrameDiagnostics


@dataclass
class MatchOutcome:
    matches: list[tuple[int, int]]
    unmatched_tracks: list[int]
    unmatched_detections: list[int]
    diagnostics: ClassDiagnostics


def partition_by_class(tracks, detections) -> dict[int, tuple[list, list]]:
    """Group tracks and detections by class id (keys sorted ascending)."""
    groups: dict[int, tuple[list, list]] = {}
    for t in tracks:
        groups.setdefault(t.class_id, ([], []))[0].append(t)
    for d in detections:
        groups.setdefault(d.class_id, ([], []))[1].append(d)
    return dict(sorted(groups.items()))


def _solve_gated(costs, gate, k, admissible=None):
    p, d = costs.shape
    if admissible is None:
        values = pad_costs(costs, k).values
    else:
        values = pad_costs_masked(costs, admissible, k).values
    cols = solve_dense(values)
    accepted = []
    for r in range(p):
        c = int(cols[r])
        if c < d and costs[r, c] <= gate and (admissible is None or admissible[r, c]):
            accepted.append((r, c))
    return accepted


def _cascade(tracks, detections, config: TrackerConfig, diag: ClassDiagnostics, partitioned: bool):
    p, d = len(tracks), len(detections)
    diag.stage1_shape = (p, d)
    admissible = None
    eager = None
    matches: list[tuple[int, int]] = []
    if p and d:
        t0 = time.perf_counter()
        if not partitioned and config.stage2_enabled:
            # The monolithic baseline scores appearance for every pair up
            # front, as the single-matrix cascade trackers do.
            rows = [i for i in range(p) if len(tracks[i].features)]
            cols = [j for j in range(d) if detections[j].embedding is not None]
            if rows and cols:
                histories = [tracks[i].features for i in rows]
                diag.cosine_evaluations += sum(len(hst) for hst in histories) * len(cols)
                full = cosine_cost_matrix(histories, np.vstack([detections[j].embedding for j in cols]))
                eager = (rows, cols, full)
        track_boxes = np.array([t.state.mean[:4] for t in tracks])
        # (cx, cy, a, h) -> (x, y, w, h)
        widths = track_boxes[:, 2] * track_boxes[:, 3]
        track_xywh = np.column_stack([
            track_boxes[:, 0] - widths / 2, track_boxes[:, 1] - track_boxes[:, 3] / 2,
            widths, track_boxes[:, 3],
        ])
        det_xywh = np.array([[b.box.x, b.box.y, b.box.w, b.box.h] for b in detections])
        cost_fn = ciou_cost_matrix if config.stage1_metric == "ciou" else iou_cost_matrix
        costs = cost_fn(track_xywh, det_xywh)
        if not partitioned:
            admissible = (np.array([t.class_id for t in tracks])[:, None]
                          == np.array([x.class_id for x in detections])[None, :])
        matches = _solve_gated(costs, config.stage1_gate, config.k, admissible)
        diag.match_seconds += time.perf_counter() - t0

    if config.stage2_enabled:
        used_t = {r for r, _ in matches}
        used_d = {c for _, c in matches}
        left_t = [i for i in range(p) if i not in used_t and len(tracks[i].features)]
        left_d = [j for j in range(d) if j not in used_d and detections[j].embedding is not None]
        if left_t and left_d:
            t0 = time.perf_counter()
            diag.stage2_invoked = True
            diag.stage2_shape = (len(left_t), len(left_d))
            if eager is not None:
                rows, cols, full = eager
                costs = full[np.ix_([rows.index(i) for i in left_t], [cols.index(j) for j in left_d])]
            else:
                histories = [tracks[i].features for i in left_t]
                diag.cosine_evaluations += sum(len(hst) for hst in histories) * len(left_d)
                costs = cosine_cost_matrix(histories, np.vstack([detections[j].embedding for j in left_d]))
            sub_admissible = None if admissible is None else admissible[np.ix_(left_t, left_d)]
            for r, c in _solve_gated(costs, config.stage2_gate, config.k, sub_admissible):
                matches.append((left_t[r], left_d[c]))
            diag.match_seconds += time.perf_counter() - t0

    matches.sort()
    used_t = {r for r, _ in matches}
    used_d = {c for _, c in matches}
    return MatchOutcome(
        matches=matches,
        unmatched_tracks=[i for i in range(p) if i not in used_t],
        unmatched_detections=[j for j in range(d) if j not in used_d],
        diagnostics=diag,
    )


def match_class(tracks, detections, config: TrackerConfig) -> MatchOutcome:
    """Two-stage cascade for one class; indices refer to the input lists.

    Tracks are matched at their current (already predicted) state.
    """
    classes = {t.class_id for t in tracks} | {x.class_id for x in detections}
    if len(classes) > 1:
        raise ValueError(f"match_class expects a single class, got {sorted(classes)}")
    class_id = classes.pop() if classes else -1
    return _cascade(list(tracks), list(detections), config, ClassDiagnostics(class_id), True)


class Tracker:
    """Stateful multi-class tracker; call :meth:`step` once per frame."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_frame: int | None = None
        self._pool: ThreadPoolExecutor | None = None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _map(self, fn, items):
        if self.config.parallel and len(items) > 1:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(thread_name_prefix="class-worker")
            return list(self._pool.map(fn, items))
        return [fn(item) for item in items]

    def _process(self, group, partitioned: bool):
        # Worker: owns ``tracks`` exclusively for this frame.
        class_id, tracks, det_items = group
        cfg = self.config
        params = cfg.kalman
        for t in tracks:
            t.state = motion.predict(t.state, params)
            t.age += 1
        detections = [det for _, det in det_items]
        outcome = _cascade(tracks, detections, cfg, ClassDiagnostics(class_id), partitioned)
        for ti, di in outcome.matches:
            t, det = tracks[ti], detections[di]
            t.state = motion.update(t.state, det.box, params)
            if det.embedding is not None:
                t.features.push(det.embedding)
            t.hits += 1
            t.time_since_update = 0
            if t.status is TrackStatus.TENTATIVE and t.hits >= cfg.n_init:
                t.status = TrackStatus.CONFIRMED
        for ti in outcome.unmatched_tracks:
            tracks[ti].time_since_update += 1
        unmatched = [det_items[j] for j in outcome.unmatched_detections]
        return outcome.diagnostics, unmatched

    def step(self, detections, frame_index: int) -> FrameResult:
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise SequencingError(
                f"frame {frame_index} does not follow frame {self._last_frame}"
            )
        self._last_frame = frame_index
        cfg = self.config
        accepted = [(i, det) for i, det in enumerate(detections) if det.confidence >= cfg.min_confidence]

        diagnostics = FrameDiagnostics()
        groups: dict[int, tuple[list, list]] = {}
        for t in self.tracks:
            groups.setdefault(t.class_id, ([], []))[0].append(t)
        for item in accepted:
            groups.setdefault(item[1].class_id, ([], []))[1].append(item)
        groups = dict(sorted(groups.items()))
        diagnostics.class_shapes = {c: (len(ts), len(ds)) for c, (ts, ds) in groups.items()}
        diagnostics.monolithic_shape = (len(self.tracks), len(accepted))

        if cfg.matcher == "partitioned":
            work = [(c, ts, ds) for c, (ts, ds) in groups.items()]
            results = self._map(lambda g: self._process(g, True), work)
        else:
            results = [self._process((-1, list(self.tracks), accepted), False)]

        unmatched_dets = []
        times = []
        for diag, leftovers in results:
            if cfg.matcher == "partitioned":
                diagnostics.per_class[diag.class_id] = diag
            diagnostics.stage2_invocations += int(diag.stage2_invoked)
            diagnostics.cosine_evaluations += diag.cosine_evaluations
            times.append(diag.match_seconds)
            unmatched_dets.extend(leftovers)
        diagnostics.match_seconds = max(times, default=0.0)
        diagnostics.match_seconds_total = sum(times)

        survivors = []
        for t in self.tracks:
            if t.time_since_update > 0:
                if t.status is TrackStatus.TENTATIVE or t.time_since_update > cfg.max_age:
                    continue
            survivors.append(t)
        unmatched_dets.sort(key=lambda item: item[0])
        for _, det in unmatched_dets:
            survivors.append(self._new_track(det))
        self.tracks = survivors

        outputs = [
            (t.id, t.class_id, t.box)
            for t in self.tracks
            if t.is_confirmed and t.time_since_update == 0
        ]
        outputs.sort(key=lambda o: o[0])
        return FrameResult(frame_index, outputs, diagnostics)

    def _new_track(self, det: Detection) -> Track:
        cfg = self.config
        features = FeatureHistory(cfg.h)
        if det.embedding is not None:
            features.push(det.embedding)
        track = Track(
            id=self._next_id,
            class_id=det.class_id,
            state=motion.initiate(det.box, cfg.kalman),
            features=features,
        )
        if cfg.n_init <= 1:
            track.status = TrackStatus.CONFIRMED
        self._next_id += 1
        return track


def run_sequence(detections_per_frame, config: TrackerConfig | None = None, first_frame: int = 1):
    """Track a whole sequence from a fresh state.

    ``detections_per_frame`` is either a list (frame ``first_frame + i``) or a
    mapping from frame index to detection list.
    """
    if hasattr(detections_per_frame, "items"):
        frames = sorted(detections_per_frame.items())
    else:
        frames = [(first_frame + i, dets) for i, dets in enumerate(detections_per_frame)]
    with Tracker(config) as tracker:
        return [tracker.step(dets, idx) for idx, dets in frames]
