"""Box overlap metrics (IoU, CIoU) and the matching costs built on them.

Boxes are ``(x, y, w, h)``: top-left corner plus width/height in pixels.
Scalar functions take :class:`BoundingBox`; the ``*_matrix`` functions take
``(N, 4)`` float arrays and are the hot path used by the tracker.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import USE_NUMBA, njit

__all__ = [
    "BoundingBox",
    "iou",
    "ciou",
    "iou_cost",
    "ciou_cost",
    "iou_matrix",
    "ciou_matrix",
    "iou_cost_matrix",
    "ciou_cost_matrix",
    "boxes_to_array",
]

_ASPECT_SCALE = 4.0 / (math.pi ** 2)


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.w, self.h)):
            raise ValueError(f"box coordinates must be finite: {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box width and height must be positive: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "BoundingBox":
        x, y, w, h = (float(v) for v in values)
        return cls(x, y, w, h)


def boxes_to_array(boxes) -> np.ndarray:
    if len(boxes) == 0:
        return np.empty((0, 4), dtype=np.float64)
    return np.array([[b.x, b.y, b.w, b.h] for b in boxes], dtype=np.float64)


def _iou_terms(ax, ay, aw, ah, bx, by, bw, bh):
    if ax == bx and ay == by and aw == bw and ah == bh:
        # (x + w) - x need not round back to w
        return 1.0
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = aw * ah + bw * bh - inter
    return min(inter / union, 1.0)


def _ciou_terms(ax, ay, aw, ah, bx, by, bw, bh):
    overlap = _iou_terms(ax, ay, aw, ah, bx, by, bw, bh)
    dx = (ax + 0.5 * aw) - (bx + 0.5 * bw)
    dy = (ay + 0.5 * ah) - (by + 0.5 * bh)
    ew = max(ax + aw, bx + bw) - min(ax, bx)
    eh = max(ay + ah, by + bh) - min(ay, by)
    distance = (dx * dx + dy * dy) / (ew * ew + eh * eh)
    diff = math.atan(aw / ah) - math.atan(bw / bh)
    v = _ASPECT_SCALE * diff * diff
    aspect = v * v / ((1.0 - overlap) + v) if v > 0.0 else 0.0
    # The raw expression can dip below -1 for far, badly mismatched boxes.
    return max(overlap - distance - aspect, -1.0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union, in [0, 1]."""
    return _iou_terms(a.x, a.y, a.w, a.h, b.x, b.y, b.w, b.h)


def ciou(a: BoundingBox, b: BoundingBox) -> float:
    """Complete IoU: IoU minus normalised centre distance and aspect penalty.

    ``alpha = v / ((1 - IoU) + v)`` is taken as 0 when ``v == 0``. The result
    is clamped to ``[-1, 1]``.
    """
    return _ciou_terms(a.x, a.y, a.w, a.h, b.x, b.y, b.w, b.h)


def iou_cost(a: BoundingBox, b: BoundingBox) -> float:
    return 1.0 - iou(a, b)


def ciou_cost(a: BoundingBox, b: BoundingBox) -> float:
    return 1.0 - ciou(a, b)


# ---------------------------------------------------------------------------
# pairwise kernels

_iou_pair = njit(_iou_terms)


@njit
def _ciou_pair(ax, ay, aw, ah, bx, by, bw, bh):
    overlap = _iou_pair(ax, ay, aw, ah, bx, by, bw, bh)
    dx = (ax + 0.5 * aw) - (bx + 0.5 * bw)
    dy = (ay + 0.5 * ah) - (by + 0.5 * bh)
    ew = max(ax + aw, bx + bw) - min(ax, bx)
    eh = max(ay + ah, by + bh) - min(ay, by)
    distance = (dx * dx + dy * dy) / (ew * ew + eh * eh)
    diff = np.arctan(aw / ah) - np.arctan(bw / bh)
    v = _ASPECT_SCALE * diff * diff
    aspect = v * v / ((1.0 - overlap) + v) if v > 0.0 else 0.0
    return max(overlap - distance - aspect, -1.0)


@njit
def _iou_matrix_loops(a, b):
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _iou_pair(a[i, 0], a[i, 1], a[i, 2], a[i, 3],
                                  b[j, 0], b[j, 1], b[j, 2], b[j, 3])
    return out


@njit
def _ciou_matrix_loops(a, b):
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _ciou_pair(a[i, 0], a[i, 1], a[i, 2], a[i, 3],
                                   b[j, 0], b[j, 1], b[j, 2], b[j, 3])
    return out


def _split(a, b):
    ax, ay, aw, ah = (a[:, k:k + 1] for k in range(4))
    bx, by, bw, bh = (b[None, :, k] for k in range(4))
    return ax, ay, aw, ah, bx, by, bw, bh


def _iou_matrix_numpy(a, b):
    ax, ay, aw, ah, bx, by, bw, bh = _split(a, b)
    iw = np.minimum(ax + aw, bx + bw) - np.maximum(ax, bx)
    ih = np.minimum(ay + ah, by + bh) - np.maximum(ay, by)
    inter = np.where((iw > 0.0) & (ih > 0.0), iw * ih, 0.0)
    overlap = np.minimum(inter / (aw * ah + bw * bh - inter), 1.0)
    same = (ax == bx) & (ay == by) & (aw == bw) & (ah == bh)
    return np.where(same, 1.0, overlap)


def _ciou_matrix_numpy(a, b):
    overlap = _iou_matrix_numpy(a, b)
    ax, ay, aw, ah, bx, by, bw, bh = _split(a, b)
    dx = (ax + 0.5 * aw) - (bx + 0.5 * bw)
    dy = (ay + 0.5 * ah) - (by + 0.5 * bh)
    ew = np.maximum(ax + aw, bx + bw) - np.minimum(ax, bx)
    eh = np.maximum(ay + ah, by + bh) - np.minimum(ay, by)
    distance = (dx * dx + dy * dy) / (ew * ew + eh * eh)
    diff = np.arctan(aw / ah) - np.arctan(bw / bh)
    v = _ASPECT_SCALE * diff * diff
    with np.errstate(invalid="ignore", divide="ignore"):
        aspect = np.where(v > 0.0, v * v / ((1.0 - overlap) + v), 0.0)
    return np.maximum(overlap - distance - aspect, -1.0)


def _as_boxes(boxes) -> np.ndarray:
    arr = np.ascontiguousarray(boxes, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        if arr.size == 0:
            return np.empty((0, 4), dtype=np.float64)
        raise ValueError(f"expected an (N, 4) box array, got shape {arr.shape}")
    return arr


def iou_matrix(a, b, *, use_numba: bool | None = None) -> np.ndarray:
    a, b = _as_boxes(a), _as_boxes(b)
    if USE_NUMBA if use_numba is None else use_numba:
        return _iou_matrix_loops(a, b)
    return _iou_matrix_numpy(a, b)


def ciou_matrix(a, b, *, use_numba: bool | None = None) -> np.ndarray:
    a, b = _as_boxes(a), _as_boxes(b)
    if USE_NUMBA if use_numba is None else use_numba:
        return _ciou_matrix_loops(a, b)
    return _ciou_matrix_numpy(a, b)


def iou_cost_matrix(a, b, *, use_numba: bool | None = None) -> np.ndarray:
    return 1.0 - iou_matrix(a, b, use_numba=use_numba)


def ciou_cost_matrix(a, b, *, use_numba: bool | None = None) -> np.ndarray:
    return 1.0 - ciou_matrix(a, b, use_numba=use_numba)
