"""Class-partitioned multi-object tracking.

Detections are split by class; each class runs its own two-stage cascade
(CIoU, then appearance) with an exact Kuhn-Munkres solver, optionally on its
own worker thread. Hot kernels are compiled with numba when available; set
``CLASSTRACK_BACKEND=numpy`` to force the pure-numpy implementations.
"""
from ._backend import BACKEND
from .assignment import Assignment, CostMatrix, brute_force_solve, solve, step_count_model
from .geometry import BoundingBox, ciou, iou
from .metrics import TrackingMetrics, evaluate
from .scenario import ScenarioSpec, generate, table1_suite
from .tracker import Detection, Tracker, TrackerConfig, run_sequence

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Assignment",
    "BoundingBox",
    "CostMatrix",
    "Detection",
    "ScenarioSpec",
    "Tracker",
    "TrackerConfig",
    "TrackingMetrics",
    "brute_force_solve",
    "ciou",
    "evaluate",
    "generate",
    "iou",
    "run_sequence",
    "solve",
    "step_count_model",
    "table1_suite",
]
