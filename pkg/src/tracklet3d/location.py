"""Per-coordinate least-squares forecasting of (x, y, nearness) with Student-t intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .state import BetaConfig, InputError, Tracklet


def to_nearness(z: float) -> float:
    if not z > 0:
        raise InputError(f"depth must be positive, got {z}")
    return -math.log(z)


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    mse: float
    t_mean: float
    sxx: float
    w_used: int
    degenerate: bool = False

    def __call__(self, t):
        return self.intercept + self.slope * t


def _ols(t: np.ndarray, v: np.ndarray):
    """Column-wise OLS of ``v`` (n, k) on abscissa ``t`` (n,).

    Returns slope, intercept, mse (each (k,)), t_mean and sxx. Callers ensure
    ``t`` has at least two distinct values.
    """
    n = t.shape[0]
    t_mean = t.mean()
    dt = t - t_mean
    sxx = float(dt @ dt)
    v_mean = v.mean(axis=0)
    slope = (dt @ (v - v_mean)) / sxx
    intercept = v_mean - slope * t_mean
    resid = v - (intercept + np.outer(t, slope))
    sse = (resid * resid).sum(axis=0)
    mse = sse / (n - 2) if n > 2 else np.zeros_like(sse)
    return slope, intercept, mse, t_mean, sxx


def fit_lines(t, v, w: int):
    """Vectorized :func:`fit_line` over the columns of ``v``; keeps the last ``w`` rows."""
    t = np.asarray(t, dtype=float)[-w:]
    v = np.asarray(v, dtype=float)
    v = v.reshape(len(v), -1)[-w:]
    n = len(t)
    if n == 0:
        raise InputError("cannot fit a line to an empty history")
    if n < 2 or np.all(t == t[0]):
        k = v.shape[1]
        return np.zeros(k), v.mean(axis=0), np.zeros(k), float(t.mean()), 0.0, n, True
    slope, intercept, mse, t_mean, sxx = _ols(t, v)
    return slope, intercept, mse, t_mean, sxx, n, False


def fit_line(points, w: int) -> RegressionFit:
    """Least-squares line through the last ``w`` of ``(t, v)`` points.

    MSE uses ``w_used - 2`` degrees of freedom and is 0 when only two points
    are available. Fewer than two distinct ``t`` values give a constant fit
    at the mean with ``degenerate=True``.
    """
    points = list(points)
    if not points:
        raise InputError("cannot fit a line to an empty history")
    t = [p[0] for p in points]
    v = [p[1] for p in points]
    slope, intercept, mse, t_mean, sxx, n, degenerate = fit_lines(t, v, w)
    return RegressionFit(float(slope[0]), float(intercept[0]), float(mse[0]), t_mean, sxx, n, degenerate)


@lru_cache(maxsize=256)
def t_quantile(confidence: float, df: int) -> float:
    """Two-sided Student-t critical value ``t_{1 - alpha/2, df}`` with ``alpha = 1 - confidence``."""
    return float(stats.t.ppf(1.0 - (1.0 - confidence) / 2.0, df))


def _interval(mse, t_mean, sxx, n, degenerate, target, confidence, floor):
    mse = np.asarray(mse, dtype=float)
    if degenerate or n <= 2:
        return np.full_like(mse, floor)
    q = t_quantile(confidence, n - 2)
    return q * np.sqrt(mse * (1.0 + 1.0 / n + (target - t_mean) ** 2 / sxx))


def prediction_interval(fit: RegressionFit, target_frame: float, confidence: float = 0.95,
                        floor: float = 5.0) -> float:
    """Half-width of the prediction interval at ``target_frame``.

    Windows of one or two points have no residual degrees of freedom and
    return ``floor``; an exact fit over more points returns 0.
    """
    return float(_interval(fit.mse, fit.t_mean, fit.sxx, fit.w_used, fit.degenerate,
                           target_frame, confidence, floor))


def forecast_location(t: Tracklet, target_frame: int, cfg: BetaConfig):
    """Predicted ``(x, y, n)`` at ``target_frame`` and the matching interval half-widths."""
    if not t.location_history:
        raise InputError(f"track {t.track_id} has no location history")
    frames = np.array([f for f, _ in t.location_history], dtype=float)
    if target_frame <= frames[-1]:
        raise InputError(f"target frame {target_frame} is not after last observation {int(frames[-1])}")
    values = np.array([[loc.x, loc.y, loc.n] for _, loc in t.location_history])
    slope, intercept, mse, t_mean, sxx, n, degenerate = fit_lines(frames, values, cfg.w)
    pred = intercept + slope * target_frame
    floors = np.array([cfg.floor_xy, cfg.floor_xy, cfg.floor_n])
    if degenerate or n <= 2:
        deltas = floors.copy()
    else:
        deltas = _interval(mse, t_mean, sxx, n, False, target_frame, cfg.confidence, 0.0)
    return pred, deltas


def predict_location(t: Tracklet, target_frame: int, cfg: BetaConfig):
    x, y, n = forecast_location(t, target_frame, cfg)[0]
    return float(x), float(y), float(n)
