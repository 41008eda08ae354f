"""Constant-velocity Kalman filter in (cx, cy, aspect, height) box space.

State is ``(cx, cy, a, h, vcx, vcy, va, vh)`` with ``a = w / h``. Process and
measurement noise scale with the current box height, so the filter behaves
the same for near and far objects. One time step is one frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox

__all__ = ["KalmanParams", "KalmanState", "initiate", "predict", "update", "to_box", "innovation_nis"]

_NDIM = 4
_MIN_SIZE = 1e-3

_TRANSITION = np.eye(2 * _NDIM)
_TRANSITION[:_NDIM, _NDIM:] = np.eye(_NDIM)
_OBSERVATION = np.eye(_NDIM, 2 * _NDIM)


@dataclass(frozen=True)
class KalmanParams:
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160


DEFAULT_PARAMS = KalmanParams()


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def height(self) -> float:
        return float(self.mean[3])


def _measurement(box: BoundingBox) -> np.ndarray:
    return np.array([box.x + box.w / 2.0, box.y + box.h / 2.0, box.w / box.h, box.h])


def to_box(state: KalmanState) -> BoundingBox:
    cx, cy, a, h = state.mean[:4]
    w = a * h
    return BoundingBox(float(cx - w / 2.0), float(cy - h / 2.0), float(w), float(h))


def initiate(box: BoundingBox, params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    """New state at ``box`` with zero velocity and height-scaled uncertainty."""
    mean = np.zeros(2 * _NDIM)
    mean[:_NDIM] = _measurement(box)
    h = box.h
    wp, wv = params.std_weight_position, params.std_weight_velocity
    std = np.array([
        2 * wp * h, 2 * wp * h, 1e-2, 2 * wp * h,
        10 * wv * h, 10 * wv * h, 1e-5, 10 * wv * h,
    ])
    return KalmanState(mean, np.diag(std ** 2))


def predict(state: KalmanState, params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    """Advance one frame under constant velocity (dead reckoning)."""
    h = state.mean[3]
    wp, wv = params.std_weight_position, params.std_weight_velocity
    std = np.array([
        wp * h, wp * h, 1e-2, wp * h,
        wv * h, wv * h, 1e-5, wv * h,
    ])
    mean = _TRANSITION @ state.mean
    # Keep the box valid when coasting on a shrinking velocity.
    mean[2] = max(mean[2], _MIN_SIZE)
    mean[3] = max(mean[3], _MIN_SIZE)
    cov = _TRANSITION @ state.covariance @ _TRANSITION.T + np.diag(std ** 2)
    return KalmanState(mean, 0.5 * (cov + cov.T))


def update(state: KalmanState, box: BoundingBox, params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    """Correct ``state`` with a matched detection box (Joseph-form covariance)."""
    h = state.mean[3]
    wp = params.std_weight_position
    r = np.diag(np.array([wp * h, wp * h, 1e-1, wp * h]) ** 2)
    hp = _OBSERVATION @ state.covariance
    s = hp @ _OBSERVATION.T + r
    gain = np.linalg.solve(s, hp).T
    innovation = _measurement(box) - _OBSERVATION @ state.mean
    mean = state.mean + gain @ innovation
    mean[2] = max(mean[2], _MIN_SIZE)
    mean[3] = max(mean[3], _MIN_SIZE)
    a = np.eye(2 * _NDIM) - gain @ _OBSERVATION
    cov = a @ state.covariance @ a.T + gain @ r @ gain.T
    return KalmanState(mean, 0.5 * (cov + cov.T))


def innovation_nis(state: KalmanState, box: BoundingBox, params: KalmanParams = DEFAULT_PARAMS) -> float:
    """Normalised innovation squared of ``box`` against a (predicted) state."""
    h = state.mean[3]
    wp = params.std_weight_position
    r = np.diag(np.array([wp * h, wp * h, 1e-1, wp * h]) ** 2)
    s = _OBSERVATION @ state.covariance @ _OBSERVATION.T + r
    innovation = _measurement(box) - _OBSERVATION @ state.mean
    return float(innovation @ np.linalg.solve(s, innovation))
