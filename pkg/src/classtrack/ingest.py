"""CSV readers/writers for detections, embeddings, ground truth and results.

All files are headerless, comma separated, one record per line:

* detections   ``frame,-1,x,y,w,h,confidence,class_id``
* embeddings   ``frame,detection_index,v1,...,vF`` (index is 0-based within
  the frame, in detection-file order)
* ground truth ``frame,object_id,x,y,w,h,class_id``
* results      ``frame,track_id,x,y,w,h,class_id``

A sequence directory holds ``det.csv``, optional ``emb.csv`` and ``gt.csv``,
and ``seqinfo.ini`` with the image size, frame count and embedding size.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import BoundingBox
from .tracker import Detection

__all__ = [
    "IngestError",
    "SequenceBundle",
    "load_detections",
    "load_embeddings",
    "load_ground_truth",
    "load_results",
    "write_detections",
    "write_embeddings",
    "write_ground_truth",
    "write_results",
    "write_sequence",
    "read_sequence",
    "bundle_from_sequence",
]

DETECTIONS_FILE = "det.csv"
EMBEDDINGS_FILE = "emb.csv"
GROUND_TRUTH_FILE = "gt.csv"
SEQINFO_FILE = "seqinfo.ini"


class IngestError(ValueError):
    """A file could not be read; the message lists every offending line."""


@dataclass(frozen=True)
class SequenceBundle:
    detections_per_frame: list[list[Detection]]
    embeddings: dict[tuple[int, int], np.ndarray] | None = None
    ground_truth: list[list[tuple[int, int, BoundingBox]]] | None = None
    image_size: tuple[int, int] | None = None
    embedding_dim: int | None = None

    @property
    def frame_count(self) -> int:
        return len(self.detections_per_frame)


def _fmt(value: float) -> str:
    return format(float(value), ".10g")


def _rows(path):
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"file not found: {path}")
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            yield lineno, [cell.strip() for cell in row]


def _parse_box(cells, path, lineno) -> BoundingBox:
    x, y, w, h = (float(c) for c in cells)
    if not all(math.isfinite(v) for v in (x, y, w, h)):
        raise ValueError("non-finite box coordinate")
    if w <= 0 or h <= 0:
        raise ValueError(f"non-positive box size w={w} h={h}")
    return BoundingBox(x, y, w, h)


def _raise_collected(path, errors):
    if errors:
        listing = "\n".join(f"  {path}:{lineno}: {msg}" for lineno, msg in errors)
        raise IngestError(f"{len(errors)} malformed row(s) in {path}:\n{listing}")


def _frame_index(cell: str) -> int:
    frame = int(cell)
    if frame < 1:
        raise ValueError(f"frame index must be >= 1, got {frame}")
    return frame


def load_detections(path, num_frames: int | None = None) -> SequenceBundle:
    """Read a detection file; frames absent from it are empty.

    ``num_frames`` extends the sequence to a declared length.
    """
    by_frame: dict[int, list[Detection]] = {}
    errors = []
    for lineno, cells in _rows(path):
        try:
            if len(cells) != 8:
                raise ValueError(f"expected 8 fields, got {len(cells)}")
            frame = _frame_index(cells[0])
            box = _parse_box(cells[2:6], path, lineno)
            confidence = float(cells[6])
            if not 0.0 <= confidence <= 1.0:
                raise ValueError(f"confidence {confidence} outside [0, 1]")
            det = Detection(box=box, class_id=int(cells[7]), confidence=confidence)
        except ValueError as exc:
            errors.append((lineno, str(exc)))
            continue
        by_frame.setdefault(frame, []).append(det)
    _raise_collected(path, errors)
    last = max(by_frame, default=0)
    if num_frames is not None:
        if num_frames < last:
            raise IngestError(f"{path} has frame {last} beyond declared count {num_frames}")
        last = num_frames
    return SequenceBundle([by_frame.get(f, []) for f in range(1, last + 1)])


def load_embeddings(path, bundle: SequenceBundle) -> SequenceBundle:
    """Attach an embedding sidecar to ``bundle``'s detections."""
    embeddings: dict[tuple[int, int], np.ndarray] = {}
    errors = []
    dim = None
    frames = bundle.detections_per_frame
    for lineno, cells in _rows(path):
        try:
            if len(cells) < 3:
                raise ValueError("expected frame, detection_index and at least one value")
            frame = _frame_index(cells[0])
            index = int(cells[1])
            vec = np.array([float(c) for c in cells[2:]])
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise ValueError(f"embedding dimension {vec.shape[0]} != {dim}")
            if not np.all(np.isfinite(vec)):
                raise ValueError("non-finite embedding value")
            if frame > len(frames) or not 0 <= index < len(frames[frame - 1]):
                raise ValueError(f"detection_index {index} out of range for frame {frame}")
            if (frame, index) in embeddings:
                raise ValueError(f"duplicate embedding for frame {frame} detection {index}")
        except ValueError as exc:
            errors.append((lineno, str(exc)))
            continue
        embeddings[(frame, index)] = vec
    _raise_collected(path, errors)
    detections = [
        [
            dataclasses.replace(det, embedding=embeddings.get((f, i)))
            for i, det in enumerate(dets)
        ]
        for f, dets in enumerate(frames, start=1)
    ]
    return dataclasses.replace(
        bundle, detections_per_frame=detections, embeddings=embeddings, embedding_dim=dim
    )


def _load_boxes_with_ids(path, kind: str):
    by_frame: dict[int, list] = {}
    errors = []
    for lineno, cells in _rows(path):
        try:
            if len(cells) != 7:
                raise ValueError(f"expected 7 fields, got {len(cells)}")
            frame = _frame_index(cells[0])
            ident = int(cells[1])
            box = _parse_box(cells[2:6], path, lineno)
            class_id = int(cells[6])
        except ValueError as exc:
            errors.append((lineno, str(exc)))
            continue
        by_frame.setdefault(frame, []).append((ident, class_id, box))
    _raise_collected(path, errors)
    for frame, items in by_frame.items():
        ids = [i for i, _, _ in items]
        if len(set(ids)) != len(ids):
            raise IngestError(f"{path}: duplicate {kind} id in frame {frame}")
    return by_frame


def load_ground_truth(path, bundle: SequenceBundle | None = None) -> SequenceBundle:
    by_frame = _load_boxes_with_ids(path, "object")
    if bundle is None:
        bundle = SequenceBundle([[] for _ in range(max(by_frame, default=0))])
    n = max(bundle.frame_count, max(by_frame, default=0))
    detections = bundle.detections_per_frame + [[] for _ in range(n - bundle.frame_count)]
    gt = [by_frame.get(f, []) for f in range(1, n + 1)]
    return dataclasses.replace(bundle, detections_per_frame=detections, ground_truth=gt)


def load_results(path) -> dict[int, list[tuple[int, int, BoundingBox]]]:
    """Tracker output keyed by frame, each entry ``(track_id, class_id, box)``."""
    return _load_boxes_with_ids(path, "track")


def _write_lines(path, lines):
    with open(path, "w", newline="") as fh:
        for line in lines:
            fh.write(line + "\n")


def write_detections(detections_per_frame, path) -> None:
    _write_lines(path, (
        ",".join([str(f), "-1", _fmt(d.box.x), _fmt(d.box.y), _fmt(d.box.w), _fmt(d.box.h),
                  _fmt(d.confidence), str(d.class_id)])
        for f, dets in enumerate(detections_per_frame, start=1)
        for d in dets
    ))


def write_embeddings(detections_per_frame, path) -> None:
    _write_lines(path, (
        ",".join([str(f), str(i)] + [_fmt(v) for v in d.embedding])
        for f, dets in enumerate(detections_per_frame, start=1)
        for i, d in enumerate(dets)
        if d.embedding is not None
    ))


def write_ground_truth(ground_truth_per_frame, path) -> None:
    _write_lines(path, (
        ",".join([str(f), str(obj_id), _fmt(b.x), _fmt(b.y), _fmt(b.w), _fmt(b.h), str(cls)])
        for f, objects in enumerate(ground_truth_per_frame, start=1)
        for obj_id, cls, b in objects
    ))


def write_results(results, path) -> None:
    """Write tracker :class:`FrameResult` objects (confirmed outputs only)."""
    _write_lines(path, (
        ",".join([str(r.frame_index), str(tid), _fmt(b.x), _fmt(b.y), _fmt(b.w), _fmt(b.h), str(cls)])
        for r in results
        for tid, cls, b in r.outputs
    ))


def bundle_from_sequence(sequence, image_size=None) -> SequenceBundle:
    """Wrap generator output as a bundle."""
    detections, ground_truth = sequence
    embeddings = {
        (f, i): d.embedding
        for f, dets in enumerate(detections, start=1)
        for i, d in enumerate(dets)
        if d.embedding is not None
    }
    dim = next(iter(embeddings.values())).shape[0] if embeddings else None
    gt = [[(o[0], o[1], o[2]) for o in frame] for frame in ground_truth]
    return SequenceBundle(
        detections_per_frame=[list(d) for d in detections],
        embeddings=embeddings or None,
        ground_truth=gt,
        image_size=image_size,
        embedding_dim=dim,
    )


def write_sequence(bundle: SequenceBundle, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_detections(bundle.detections_per_frame, out / DETECTIONS_FILE)
    if bundle.embeddings:
        write_embeddings(bundle.detections_per_frame, out / EMBEDDINGS_FILE)
    if bundle.ground_truth is not None:
        write_ground_truth(bundle.ground_truth, out / GROUND_TRUTH_FILE)
    info = configparser.ConfigParser()
    info["sequence"] = {"frame_count": str(bundle.frame_count)}
    if bundle.image_size is not None:
        info["sequence"]["image_width"] = str(bundle.image_size[0])
        info["sequence"]["image_height"] = str(bundle.image_size[1])
    if bundle.embedding_dim is not None:
        info["sequence"]["embedding_dim"] = str(bundle.embedding_dim)
    with open(out / SEQINFO_FILE, "w") as fh:
        info.write(fh)
    return out


def read_sequence(seq_dir, with_embeddings: bool = True) -> SequenceBundle:
    seq = Path(seq_dir)
    if not seq.is_dir():
        raise IngestError(f"sequence directory not found: {seq}")
    frame_count = None
    image_size = None
    dim = None
    info_path = seq / SEQINFO_FILE
    if info_path.is_file():
        info = configparser.ConfigParser()
        try:
            info.read(info_path)
            section = info["sequence"]
            frame_count = section.getint("frame_count")
            if "image_width" in section:
                image_size = (section.getint("image_width"), section.getint("image_height"))
            dim = section.getint("embedding_dim", fallback=None)
        except (configparser.Error, KeyError, ValueError) as exc:
            raise IngestError(f"bad {info_path}: {exc}") from exc
    bundle = load_detections(seq / DETECTIONS_FILE, num_frames=frame_count)
    bundle = dataclasses.replace(bundle, image_size=image_size, embedding_dim=dim)
    if with_embeddings and (seq / EMBEDDINGS_FILE).is_file():
        bundle = load_embeddings(seq / EMBEDDINGS_FILE, bundle)
        if dim is not None and bundle.embedding_dim not in (None, dim):
            raise IngestError(
                f"embedding dimension {bundle.embedding_dim} != declared {dim} in {info_path}"
            )
    if (seq / GROUND_TRUTH_FILE).is_file():
        bundle = load_ground_truth(seq / GROUND_TRUTH_FILE, bundle)
    return bundle
