"""CLEAR-MOT evaluation (MOTA, MOTP, ID switches)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .assignment import pad_costs, solve_dense
from .geometry import iou_matrix

__all__ = ["TrackingMetrics", "UndefinedMetricError", "evaluate"]


class UndefinedMetricError(ValueError):
    """MOTA is undefined without ground-truth objects."""


@dataclass(frozen=True)
class TrackingMetrics:
    mota: float
    motp: float
    id_switches: int
    false_positives: int
    misses: int
    gt_count: int
    matches: int
    frames: int
    switches_by_object: dict[int, int] = field(default_factory=dict)

    def summary(self) -> str:
        return (
            f"MOTA {self.mota:.3f}  MOTP {self.motp:.3f}  IDS {self.id_switches}  "
            f"FP {self.false_positives}  FN {self.misses}  GT {self.gt_count}  "
            f"frames {self.frames}"
        )

    def as_row(self) -> dict[str, object]:
        return {
            "mota": f"{self.mota:.6f}",
            "motp": f"{self.motp:.6f}",
            "id_switches": self.id_switches,
            "false_positives": self.false_positives,
            "misses": self.misses,
            "gt_count": self.gt_count,
            "matches": self.matches,
            "frames": self.frames,
        }

    def to_csv(self, path) -> None:
        row = self.as_row()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row))
            writer.writeheader()
            writer.writerow(row)


def _by_frame(data) -> dict[int, list]:
    # Accepts {frame: [(id, class, box), ...]}, a list indexed from frame 1,
    # or tracker FrameResult objects.
    if hasattr(data, "items"):
        return {int(f): list(v) for f, v in data.items()}
    data = list(data)
    if data and hasattr(data[0], "frame_index"):
        return {r.frame_index: list(r.outputs) for r in data}
    return {f: list(v) for f, v in enumerate(data, start=1)}


def _boxes(items) -> np.ndarray:
    return np.array([[b.x, b.y, b.w, b.h] for _, _, b in items]).reshape(-1, 4)


def evaluate(results, ground_truth, iou_threshold: float = 0.5, frames=None) -> TrackingMetrics:
    """Score tracker output against ground truth.

    Per frame, ground-truth objects keep last frame's track when that pairing
    still overlaps by at least ``iou_threshold``; the rest are assigned by
    minimum ``1 - IoU`` among pairs above the threshold. An ID switch is
    counted whenever an object is matched to a different track than the one
    it was last matched to. ``frames`` restricts scoring to those frame
    indices.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
    hyp_frames = _by_frame(results)
    gt_frames = _by_frame(ground_truth)
    if frames is None:
        frame_ids = sorted(set(hyp_frames) | set(gt_frames))
    else:
        frame_ids = sorted(set(frames))

    last_match: dict[int, int] = {}
    switches: dict[int, int] = {}
    n_gt = n_fp = n_miss = n_match = 0
    overlap_sum = 0.0
    for frame in frame_ids:
        gts = sorted(gt_frames.get(frame, []), key=lambda o: o[0])
        hyps = sorted(hyp_frames.get(frame, []), key=lambda o: o[0])
        n_gt += len(gts)
        if not gts or not hyps:
            n_fp += len(hyps)
            n_miss += len(gts)
            continue
        overlap = iou_matrix(_boxes(gts), _boxes(hyps))
        valid = overlap >= iou_threshold
        hyp_index = {tid: j for j, (tid, _, _) in enumerate(hyps)}
        pairs: list[tuple[int, int]] = []
        taken_h: set[int] = set()
        for i, (oid, _, _) in enumerate(gts):
            j = hyp_index.get(last_match.get(oid))
            if j is not None and valid[i, j] and j not in taken_h:
                pairs.append((i, j))
                taken_h.add(j)
        taken_g = {i for i, _ in pairs}
        rows = [i for i in range(len(gts)) if i not in taken_g]
        cols = [j for j in range(len(hyps)) if j not in taken_h]
        if rows and cols:
            sub_valid = valid[np.ix_(rows, cols)]
            # invalid pairs cost more than any set of valid ones, so the
            # optimum maximises the number of valid matches first
            big = float(len(rows) + 1)
            costs = np.where(sub_valid, 1.0 - overlap[np.ix_(rows, cols)], big)
            assignment = solve_dense(pad_costs(costs).values)
            for r, c in enumerate(assignment[: len(rows)]):
                if c < len(cols) and sub_valid[r, c]:
                    pairs.append((rows[r], cols[c]))
        for i, j in pairs:
            oid, tid = gts[i][0], hyps[j][0]
            previous = last_match.get(oid)
            if previous is not None and previous != tid:
                switches[oid] = switches.get(oid, 0) + 1
            last_match[oid] = tid
            overlap_sum += float(overlap[i, j])
        n_match += len(pairs)
        n_fp += len(hyps) - len(pairs)
        n_miss += len(gts) - len(pairs)

    if n_gt == 0:
        raise UndefinedMetricError("no ground-truth objects in the evaluated frames")
    n_switch = sum(switches.values())
    return TrackingMetrics(
        mota=1.0 - (n_miss + n_fp + n_switch) / n_gt,
        motp=overlap_sum / n_match if n_match else 0.0,
        id_switches=n_switch,
        false_positives=n_fp,
        misses=n_miss,
        gt_count=n_gt,
        matches=n_match,
        frames=len(frame_ids),
        switches_by_object=switches,
    )
