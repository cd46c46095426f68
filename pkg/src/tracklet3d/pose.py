"""Pose forecasting behind a small pluggable interface.

The default backend extrapolates each embedding dimension linearly over the
recent pose window, using the true frame indices so occlusion gaps are simply
missing rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .location import fit_lines
from .state import InputError

BACKENDS = ("last_value", "linear_extrapolation", "external")


@dataclass(frozen=True)
class PosePredictor:
    backend: str = "linear_extrapolation"
    horizon: int = 12
    window: int = 12

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise InputError(f"unknown pose backend {self.backend!r}")
        if self.horizon < 1 or self.window < 1:
            raise InputError("pose horizon and window must be >= 1")


def clamp_target(last_frame: int, target_frame: int, horizon: int):
    """Clamp ``target_frame`` to at most ``horizon`` frames past ``last_frame``.

    Returns the effective target and whether clamping happened.
    """
    if target_frame - last_frame > horizon:
        return last_frame + horizon, True
    return target_frame, False


def predict_pose(history, target_frame: int, predictor: PosePredictor, external=None) -> np.ndarray:
    """Forecast the pose embedding at ``target_frame``.

    ``history`` is a sequence of ``(frame_index, embedding)``. For the external
    backend, ``external`` is ``(frame, rows)`` where row ``k`` holds the pose
    ``k + 1`` frames after ``frame``; without it the last value is returned.
    """
    history = list(history)
    if not history:
        raise InputError("cannot predict a pose from an empty history")
    last_frame, last = history[-1]
    if target_frame < last_frame:
        raise InputError(f"target frame {target_frame} precedes last pose frame {last_frame}")
    target, _ = clamp_target(last_frame, target_frame, predictor.horizon)
    if predictor.backend == "last_value" or target == last_frame:
        return np.array(last, dtype=float)
    if predictor.backend == "external":
        if external is None or external[1] is None:
            return np.array(last, dtype=float)
        ext_frame, rows = external
        k = min(target - ext_frame, len(rows)) - 1
        if k < 0:
            return np.array(last, dtype=float)
        return np.array(rows[k], dtype=float)
    frames = np.array([f for f, _ in history], dtype=float)
    values = np.stack([np.asarray(p, dtype=float) for _, p in history])
    slope, intercept, *_ = fit_lines(frames, values, predictor.window)
    return intercept + slope * target
