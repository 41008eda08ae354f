"""Synthetic multi-class sequences with scripted detector failures.

A :class:`ScenarioSpec` describes how many objects of each class are present,
how they move and which detector events (occlusion, dropout,
misclassification) hit them. :func:`generate` turns it into per-frame
detections plus unmodified ground truth. Frames are numbered from 1.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geometry import BoundingBox
from .tracker import Detection

__all__ = [
    "ObjectSpec",
    "FrameEvent",
    "ScenarioSpec",
    "ScenarioError",
    "GroundTruthObject",
    "Sequence",
    "generate",
    "table1_suite",
    "TABLE1_DISTRIBUTIONS",
    "occlusion_scenario",
    "misclassification_scenario",
    "spec_from_dict",
    "spec_to_dict",
    "load_spec",
]

EVENT_KINDS = ("occlusion", "misclassify", "dropout")

TABLE1_DISTRIBUTIONS = (
    (2, 2, 2),
    (3, 2, 1),
    (1, 1, 4),
    (6, 0, 0),
    (0, 0, 6),
    (3, 3, 3),
    (4, 4, 4),
)

# width, height in pixels: car, bus, motorbike
_CLASS_SIZES = ((70.0, 40.0), (120.0, 60.0), (24.0, 36.0))
_MAX_EMBEDDING_COSINE = 0.5


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectSpec:
    """One object's trajectory; centre moves by ``velocity`` each frame.

    Between ``turn_start`` and ``turn_end`` (inclusive) the velocity vector
    rotates by ``turn_rate`` radians per frame, producing a circular arc.
    """

    class_id: int
    center: tuple[float, float]
    size: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    start_frame: int = 1
    end_frame: int | None = None
    turn_rate: float = 0.0
    turn_start: int = 1
    turn_end: int | None = None


@dataclass(frozen=True)
class FrameEvent:
    kind: str
    object_id: int
    start: int
    end: int
    wrong_class: int | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    class_counts: tuple[int, ...]
    num_frames: int = 100
    image_size: tuple[int, int] = (1920, 1080)
    motion: str = "linear"
    objects: tuple[ObjectSpec, ...] | None = None
    embedding_dim: int = 32
    embedding_noise: float = 0.0
    detection_noise: float = 0.0
    confidence: float = 0.9
    events: tuple[FrameEvent, ...] = ()
    seed: int = 0

    @property
    def label(self) -> str:
        return "(" + ",".join(str(c) for c in self.class_counts) + ")"

    @property
    def num_objects(self) -> int:
        return sum(self.class_counts)


class GroundTruthObject(NamedTuple):
    object_id: int
    class_id: int
    box: BoundingBox


class Sequence(NamedTuple):
    detections: list[list[Detection]]
    ground_truth: list[list[GroundTruthObject]]


def _validate(spec: ScenarioSpec) -> None:
    counts = spec.class_counts
    if any(c < 0 for c in counts) or sum(counts) <= 0:
        raise ScenarioError(f"class counts must be >= 0 with a positive sum, got {counts}")
    if spec.num_frames < 1:
        raise ScenarioError(f"num_frames must be >= 1, got {spec.num_frames}")
    if spec.embedding_noise < 0 or spec.detection_noise < 0:
        raise ScenarioError("noise standard deviations must be >= 0")
    if spec.embedding_dim < 2:
        raise ScenarioError("embedding_dim must be >= 2")
    if spec.motion not in ("linear", "arc"):
        raise ScenarioError(f"motion must be 'linear' or 'arc', got {spec.motion!r}")
    if not 0 <= spec.confidence <= 1:
        raise ScenarioError(f"confidence must lie in [0, 1], got {spec.confidence}")
    if spec.objects is not None:
        if len(spec.objects) != sum(counts):
            raise ScenarioError(
                f"{len(spec.objects)} objects given for class counts {counts}"
            )
        per_class = [0] * len(counts)
        for obj in spec.objects:
            if not 0 <= obj.class_id < len(counts):
                raise ScenarioError(f"object class {obj.class_id} outside 0..{len(counts) - 1}")
            if obj.size[0] <= 0 or obj.size[1] <= 0:
                raise ScenarioError(f"object size must be positive, got {obj.size}")
            per_class[obj.class_id] += 1
        if tuple(per_class) != tuple(counts):
            raise ScenarioError(f"objects per class {per_class} != class counts {counts}")
    n = sum(counts)
    for ev in spec.events:
        if ev.kind not in EVENT_KINDS:
            raise ScenarioError(f"unknown event kind {ev.kind!r}")
        if not 1 <= ev.object_id <= n:
            raise ScenarioError(f"event references object {ev.object_id}, valid ids are 1..{n}")
        if not 1 <= ev.start <= ev.end <= spec.num_frames:
            raise ScenarioError(
                f"event frames {ev.start}..{ev.end} outside 1..{spec.num_frames}"
            )
        if ev.kind == "misclassify" and ev.wrong_class is None:
            raise ScenarioError("misclassify events need wrong_class")


def _lane_layout(spec: ScenarioSpec, rng: np.random.Generator) -> list[ObjectSpec]:
    # One horizontal lane per object, so noiseless runs never overlap.
    width, height = spec.image_size
    classes = [c for c, count in enumerate(spec.class_counts) for _ in range(count)]
    n = len(classes)
    spacing = height / (n + 1)
    lanes = rng.permutation(n)
    objects = []
    for i, class_id in enumerate(classes):
        w, h = _CLASS_SIZES[class_id] if class_id < len(_CLASS_SIZES) else (50.0, 50.0)
        scale = min(1.0, 0.8 * spacing / h)
        w, h = w * scale, h * scale
        speed = rng.uniform(1.5, 4.0)
        span = width - 2 * w
        travel = speed * (spec.num_frames - 1)
        if travel > 0.8 * span:
            speed = 0.8 * span / max(spec.num_frames - 1, 1)
            travel = speed * (spec.num_frames - 1)
        direction = 1.0 if rng.random() < 0.5 else -1.0
        lo = w + (0.0 if direction > 0 else travel)
        hi = width - w - (travel if direction > 0 else 0.0)
        cx = rng.uniform(lo, hi)
        cy = spacing * (lanes[i] + 1)
        turn = rng.uniform(-0.004, 0.004) if spec.motion == "arc" else 0.0
        objects.append(ObjectSpec(
            class_id=class_id,
            center=(float(cx), float(cy)),
            size=(float(w), float(h)),
            velocity=(float(direction * speed), 0.0),
            turn_rate=float(turn),
        ))
    return objects


def _base_embeddings(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    vectors: list[np.ndarray] = []
    attempts = 0
    while len(vectors) < n:
        attempts += 1
        if attempts > 10000 * max(n, 1):
            raise ScenarioError(
                f"cannot draw {n} embeddings of dimension {dim} with pairwise cosine < "
                f"{_MAX_EMBEDDING_COSINE}; raise embedding_dim"
            )
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        if all(float(v @ u) < _MAX_EMBEDDING_COSINE for u in vectors):
            vectors.append(v)
    return np.array(vectors).reshape(n, dim)


def _trajectory(obj: ObjectSpec, num_frames: int) -> dict[int, tuple[float, float]]:
    centers = {}
    x, y = obj.center
    vx, vy = obj.velocity
    last = obj.end_frame if obj.end_frame is not None else num_frames
    turn_end = obj.turn_end if obj.turn_end is not None else num_frames
    for frame in range(obj.start_frame, min(last, num_frames) + 1):
        centers[frame] = (x, y)
        x, y = x + vx, y + vy
        if obj.turn_rate and obj.turn_start <= frame <= turn_end:
            c, s = math.cos(obj.turn_rate), math.sin(obj.turn_rate)
            vx, vy = c * vx - s * vy, s * vx + c * vy
    return centers


def _clamped_box(cx, cy, w, h, width, height) -> BoundingBox | None:
    x0, y0 = max(cx - w / 2, 0.0), max(cy - h / 2, 0.0)
    x1, y1 = min(cx + w / 2, float(width)), min(cy + h / 2, float(height))
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        return None
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def generate(spec: ScenarioSpec) -> Sequence:
    """Render ``spec`` into ``(detections_per_frame, ground_truth_per_frame)``.

    Ground truth object ids are 1-based in class order; class ids are the
    indices of ``spec.class_counts``. Output is a pure function of ``spec``.
    """
    _validate(spec)
    rng = np.random.default_rng(spec.seed)
    objects = list(spec.objects) if spec.objects is not None else _lane_layout(spec, rng)
    n = len(objects)
    embeddings = _base_embeddings(n, spec.embedding_dim, rng)
    width, height = spec.image_size

    suppressed: set[tuple[int, int]] = set()
    relabel: dict[tuple[int, int], int] = {}
    for ev in spec.events:
        for frame in range(ev.start, ev.end + 1):
            if ev.kind == "misclassify":
                relabel[(frame, ev.object_id)] = int(ev.wrong_class)
            else:
                suppressed.add((frame, ev.object_id))

    tracks = []
    for obj in objects:
        centers = _trajectory(obj, spec.num_frames)
        departed = None
        for frame in sorted(centers):
            cx, cy = centers[frame]
            if not (0 <= cx <= width and 0 <= cy <= height):
                departed = frame
                break
        if departed is not None:
            centers = {f: c for f, c in centers.items() if f < departed}
        tracks.append(centers)

    detections: list[list[Detection]] = []
    ground_truth: list[list[GroundTruthObject]] = []
    for frame in range(1, spec.num_frames + 1):
        frame_dets, frame_gt = [], []
        for idx, (obj, centers) in enumerate(zip(objects, tracks)):
            if frame not in centers:
                continue
            object_id = idx + 1
            w, h = obj.size
            cx, cy = centers[frame]
            box = _clamped_box(cx, cy, w, h, width, height)
            if box is None:
                continue
            frame_gt.append(GroundTruthObject(object_id, obj.class_id, box))
            # noise draws happen for every visible object so events never
            # shift the random stream of other objects
            jitter = rng.normal(0.0, spec.detection_noise, 4) if spec.detection_noise else np.zeros(4)
            emb_noise = (rng.normal(0.0, spec.embedding_noise, spec.embedding_dim)
                         if spec.embedding_noise else 0.0)
            if (frame, object_id) in suppressed:
                continue
            noisy = _clamped_box(cx + jitter[0], cy + jitter[1],
                                 max(w + jitter[2], 1.0), max(h + jitter[3], 1.0), width, height)
            if noisy is None:
                continue
            emb = embeddings[idx] + emb_noise
            if not np.any(emb):
                emb = embeddings[idx].copy()
            frame_dets.append(Detection(
                box=noisy,
                class_id=relabel.get((frame, object_id), obj.class_id),
                confidence=spec.confidence,
                embedding=np.array(emb, dtype=np.float64),
            ))
        detections.append(frame_dets)
        ground_truth.append(frame_gt)
    return Sequence(detections, ground_truth)


def table1_suite(num_frames: int = 100, seed: int = 0, **overrides) -> list[ScenarioSpec]:
    """The seven class distributions of the scaling study, sharing defaults."""
    return [
        ScenarioSpec(class_counts=counts, num_frames=num_frames, seed=seed, **overrides)
        for counts in TABLE1_DISTRIBUTIONS
    ]


def occlusion_scenario(seed: int = 0, occlusion_frames: int = 15, num_frames: int = 75) -> ScenarioSpec:
    """A car turns while hidden behind a passing bus, then reappears.

    Object 1 is the occluded car. It drives straight, starts a ~90 degree
    turn when the occlusion begins and is invisible for ``occlusion_frames``
    frames, so constant-velocity prediction lands far from where it
    reappears. Object 4 is the bus passing in front of it; the rest is
    background traffic in other lanes.
    """
    rng = np.random.default_rng(seed)
    occ_start = 30
    occ_end = occ_start + occlusion_frames - 1
    speed = rng.uniform(4.0, 6.0)
    direction = 1.0 if rng.random() < 0.5 else -1.0
    bend = (1.0 if rng.random() < 0.5 else -1.0) * rng.uniform(0.4, 0.5) * math.pi
    car_start = 700.0 - direction * speed * (occ_start - 1)
    car = ObjectSpec(
        class_id=0,
        center=(car_start, 540.0),
        size=_CLASS_SIZES[0],
        velocity=(direction * speed, 0.0),
        turn_rate=bend / occlusion_frames,
        turn_start=occ_start,
        turn_end=occ_end - 1,
    )
    # The bus crosses the car's lane in the other direction, covering it
    # around the middle of the occlusion.
    bus_speed = rng.uniform(3.0, 5.0)
    meet = occ_start + occlusion_frames // 2
    car_x_at_meet = car_start + direction * speed * (occ_start - 1)
    bus = ObjectSpec(
        class_id=1,
        center=(car_x_at_meet + direction * bus_speed * (meet - 1), 530.0),
        size=_CLASS_SIZES[1],
        velocity=(-direction * bus_speed, 0.0),
    )
    background = []
    lanes = (150.0, 300.0, 900.0)
    for lane, class_id in zip(lanes, (0, 2, 0)):
        v = rng.uniform(1.5, 3.5) * (1.0 if rng.random() < 0.5 else -1.0)
        x = rng.uniform(500.0, 1400.0)
        background.append(ObjectSpec(class_id=class_id, center=(x, lane),
                                     size=_CLASS_SIZES[class_id], velocity=(v, 0.0)))
    objects = (car, background[0], background[2], bus, background[1])
    return ScenarioSpec(
        class_counts=(3, 1, 1),
        num_frames=num_frames,
        objects=objects,
        embedding_noise=0.05,
        detection_noise=0.5,
        events=(FrameEvent("occlusion", 1, occ_start, occ_end),),
        seed=seed,
    )


def misclassification_scenario(flip: bool = True, arrival: int = 10, num_frames: int = 30) -> ScenarioSpec:
    """Four established objects plus a car arriving at ``arrival``.

    With ``flip`` the newcomer (object 5) is reported as a bus on frame
    ``arrival + 2``, while its track is still being initialised.
    """
    objects = (
        ObjectSpec(0, (300.0, 200.0), _CLASS_SIZES[0], (3.0, 0.0)),
        ObjectSpec(0, (1500.0, 400.0), _CLASS_SIZES[0], (-3.0, 0.0)),
        ObjectSpec(1, (400.0, 650.0), _CLASS_SIZES[1], (2.0, 0.0)),
        ObjectSpec(1, (1400.0, 900.0), _CLASS_SIZES[1], (-2.0, 0.0)),
        ObjectSpec(0, (900.0, 800.0), _CLASS_SIZES[0], (2.5, 0.0), start_frame=arrival),
    )
    events = (FrameEvent("misclassify", 5, arrival + 2, arrival + 2, wrong_class=1),) if flip else ()
    return ScenarioSpec(
        class_counts=(3, 2),
        num_frames=num_frames,
        objects=objects,
        events=events,
    )


# ---------------------------------------------------------------------------
# JSON round-trip for spec files

def spec_to_dict(spec: ScenarioSpec) -> dict:
    return dataclasses.asdict(spec)


def spec_from_dict(data: dict) -> ScenarioSpec:
    known = {f.name for f in dataclasses.fields(ScenarioSpec)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {', '.join(unknown)}")
    if "class_counts" not in data:
        raise ScenarioError("scenario needs class_counts")
    values = dict(data)
    values["class_counts"] = tuple(int(c) for c in values["class_counts"])
    if "image_size" in values:
        values["image_size"] = tuple(int(v) for v in values["image_size"])
    try:
        if values.get("objects") is not None:
            values["objects"] = tuple(
                ObjectSpec(**{**o, "center": tuple(o["center"]), "size": tuple(o["size"]),
                              "velocity": tuple(o.get("velocity", (0.0, 0.0)))})
                for o in values["objects"]
            )
        values["events"] = tuple(FrameEvent(**e) for e in values.get("events", ()))
        spec = ScenarioSpec(**values)
    except (TypeError, KeyError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    _validate(spec)
    return spec


def load_spec(path) -> ScenarioSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ScenarioError(f"scenario file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"scenario file {path} must hold a JSON object")
    return spec_from_dict(data)
