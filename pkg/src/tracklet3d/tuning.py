"""Fitting the five association parameters from ground-truth-labeled sequences.

Distances are harvested with teacher forcing: tracklets are grown from the
ground-truth identities, so what a parameter setting is judged on does not
depend on earlier association mistakes. Only the cost and the assignment are
re-evaluated when the parameters change.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .appearance import AppearanceEncoder
from .association import PairDistances, cost_from_distances, pair_distances, solve_assignment
from .pose import PosePredictor
from .state import BetaConfig, InputError, spawn_tracklet, touch_tracklet
from .tracker import detection_arrays, predict_tracklet

logger = logging.getLogger(__name__)

BETA_MIN = 1e-6
BETA_MAX = 1e6


@dataclass
class LabeledFrame:
    frame: int
    dist: PairDistances
    track_gt: np.ndarray
    det_gt: np.ndarray
    shot_mode: bool = False


def build_labeled_frames(frames, gt_ids: Dict[str, int], cfg: BetaConfig,
                         shot_frames: Sequence[int] = (), encoder: Optional[AppearanceEncoder] = None
                         ) -> List[LabeledFrame]:
    """Teacher-forced forecasts against every detection of every frame.

    ``gt_ids`` maps detection ids to identities; ids missing from it or
    negative are clutter. A ground-truth tracklet is offered for matching while
    it would still be alive in the tracker (unmatched for fewer than
    ``t_max`` frames).
    """
    enc = encoder or AppearanceEncoder()
    posep = PosePredictor(cfg.pose_backend, cfg.c, cfg.pose_window)
    shots = sorted(shot_frames)
    tracks = {}
    out = []
    cursor = -1
    for f, dets in frames:
        shot_mode = any(cursor < b <= f for b in shots)
        if shot_mode:
            for t in tracks.values():
                t.location_history.clear()
        live = [g for g, t in sorted(tracks.items()) if f - t.last_frame <= cfg.t_max]
        preds = [predict_tracklet(tracks[g], f, cfg, enc, posep)[0] for g in live]
        app, pose, loc = detection_arrays(dets, enc)
        det_gt = np.array([gt_ids.get(d.detection_id, -1) for d in dets], dtype=int)
        out.append(LabeledFrame(f, pair_distances(preds, app, pose, loc), np.array(live, dtype=int),
                                det_gt, shot_mode))
        for d, g in zip(dets, det_gt):
            if g < 0:
                continue
            if g in tracks and f - tracks[g].last_frame <= cfg.t_max:
                touch_tracklet(tracks[g], d, cfg)
            else:
                tracks[g] = spawn_tracklet(d, int(g), cfg)
        cursor = f
    return out


@dataclass
class LabeledDistances:
    """Per-pair cue distances labeled inlier (same identity) or outlier.

    ``xy`` and ``nearness`` are normalized by the prediction interval and are
    NaN for pairs scored without a location forecast.
    """

    appearance: np.ndarray
    pose: np.ndarray
    xy: np.ndarray
    nearness: np.ndarray
    inlier: np.ndarray
    raw: Dict[str, np.ndarray] = field(default_factory=dict)

    def cue(self, name: str, inlier: bool = True) -> np.ndarray:
        v = getattr(self, name)[self.inlier == inlier]
        return v[np.isfinite(v)]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("appearance", "pose", "xy", "nearness", "inlier")}


def distances_from_frames(labeled: Sequence[LabeledFrame]) -> LabeledDistances:
    cols = {k: [] for k in ("appearance", "pose", "xy", "interval_xy", "nearness", "interval_n")}
    loc_ok, inl = [], []
    for lf in labeled:
        T, D = lf.dist.shape
        if T == 0 or D == 0:
            continue
        for k in cols:
            cols[k].append(np.broadcast_to(getattr(lf.dist, k), (T, D)).ravel())
        ok = np.broadcast_to(lf.dist.has_location, (T, D)) & (not lf.shot_mode)
        loc_ok.append(ok.ravel())
        same = (lf.track_gt[:, None] == lf.det_gt[None, :]) & (lf.det_gt[None, :] >= 0)
        inl.append(same.ravel())
    if not inl:
        e = np.zeros(0)
        return LabeledDistances(e, e, e, e, np.zeros(0, dtype=bool))
    raw = {k: np.concatenate(v) for k, v in cols.items()}
    ok = np.concatenate(loc_ok)
    xy = np.where(ok, raw["xy"] / raw["interval_xy"], np.nan)
    n = np.where(ok, raw["nearness"] / raw["interval_n"], np.nan)
    return LabeledDistances(raw["appearance"], raw["pose"], xy, n, np.concatenate(inl), raw)


def harvest_distances(frames, gt_ids: Dict[str, int], cfg: BetaConfig, shot_frames: Sequence[int] = (),
                      encoder: Optional[AppearanceEncoder] = None) -> LabeledDistances:
    """Inlier/outlier distance samples between tracklet forecasts and detections."""
    return distances_from_frames(build_labeled_frames(frames, gt_ids, cfg, shot_frames, encoder))


def _clamp(beta: float) -> float:
    if not math.isfinite(beta) or beta <= 0:
        return BETA_MIN
    return min(max(beta, BETA_MIN), BETA_MAX)


def init_betas(d: LabeledDistances, base: Optional[BetaConfig] = None, min_samples: int = 100,
               th_quantile: float = 99.0) -> BetaConfig:
    """Initial parameters from the inlier distance distributions.

    Cauchy cues take ``1 / median`` (the posterior is 0.5 at the median
    inlier), exponential cues take the sample mean of the normalized distance
    (the maximum-likelihood scale), and the threshold is the 99th percentile
    of the resulting inlier cost. All-zero distances clamp to ``BETA_MIN``.
    """
    base = base or BetaConfig()
    samples = {c: d.cue(c) for c in ("appearance", "pose", "xy", "nearness")}
    short = [c for c, v in samples.items() if len(v) < min_samples]
    if short:
        raise InputError(f"need >= {min_samples} inlier samples per cue; short: {short}")
    med_a = float(np.median(samples["appearance"]))
    med_p = float(np.median(samples["pose"]))
    cfg = base.with_betas([
        _clamp(1.0 / med_a) if med_a > 0 else BETA_MIN,
        _clamp(1.0 / med_p) if med_p > 0 else BETA_MIN,
        _clamp(float(np.mean(samples["xy"]))),
        _clamp(float(np.mean(samples["nearness"]))),
        base.beta_th,
    ])
    costs = inlier_costs(d, cfg)
    th = float(np.percentile(costs, th_quantile)) if len(costs) else base.beta_th
    # the threshold must stay positive; inlier costs can be negative with normalizers
    return cfg.with_betas(list(cfg.betas[:4]) + [_clamp(th)])


def inlier_costs(d: LabeledDistances, cfg: BetaConfig) -> np.ndarray:
    if not d.raw:
        return np.zeros(0)
    m = d.inlier
    r = d.raw
    has_loc = np.isfinite(d.xy[m])
    dist = PairDistances(r["appearance"][m], r["pose"][m], r["xy"][m], r["interval_xy"][m],
                         r["nearness"][m], r["interval_n"][m], has_loc)
    return cost_from_distances(dist, cfg)


def frame_errors(cfg: BetaConfig, lf: LabeledFrame):
    """Wrong decisions and decision count for one labeled frame."""
    T, D = lf.dist.shape
    if D == 0:
        return 0, 0
    truth = np.where(np.isin(lf.det_gt, lf.track_gt), lf.det_gt, -1)
    if T == 0:
        return int(np.sum(truth >= 0)), D
    res = solve_assignment(cost_from_distances(lf.dist, cfg, lf.shot_mode), cfg.beta_th)
    decided = np.full(D, -1)
    for i, j in res.matches:
        decided[j] = lf.track_gt[i]
    # clutter has truth -1, so matching it to any track is wrong too
    wrong = (decided != truth) | ((decided >= 0) & (lf.det_gt < 0))
    return int(wrong.sum()), D


def association_error(cfg: BetaConfig, labeled_frames: Sequence[LabeledFrame]) -> float:
    """Fraction of per-detection match/no-match decisions that disagree with ground truth."""
    wrong = total = 0
    for lf in labeled_frames:
        w, n = frame_errors(cfg, lf)
        wrong += w
        total += n
    return wrong / total if total else 0.0


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool
    history: List[float] = field(default_factory=list)


def nelder_mead(f: Callable[[np.ndarray], float], x0, initial_step=0.5, max_iter: int = 500,
                tol: float = 1e-4, alpha=1.0, gamma=2.0, rho=0.5, sigma=0.5,
                lower_bound: Optional[float] = None) -> SimplexResult:
    """Downhill simplex minimization.

    Stops when the simplex diameter (max vertex distance from the best vertex)
    drops below ``tol``, after ``max_iter`` iterations, or immediately when
    ``f`` reaches ``lower_bound``. The initial point is a vertex, so the
    returned value never exceeds ``f(x0)``.
    """
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    steps = np.broadcast_to(np.asarray(initial_step, dtype=float), (n,))
    simplex = [x0.copy()]
    for i in range(n):
        v = x0.copy()
        v[i] += steps[i]
        simplex.append(v)
    simplex = np.array(simplex)
    values = np.array([f(v) for v in simplex])
    nfev = n + 1
    history = [float(values[0])]
    it = 0
    converged = False
    if lower_bound is not None and values[0] <= lower_bound:
        return SimplexResult(x0, float(values[0]), 0, 1, True, history)
    while it < max_iter:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        history.append(float(values[0]))
        if np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1)) < tol:
            converged = True
            break
        if lower_bound is not None and values[0] <= lower_bound:
            converged = True
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        nfev += 1
        if values[0] <= fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            nfev += 1
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = f(xc)
            nfev += 1
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + rho * (worst - centroid)
            fc = f(xc)
            nfev += 1
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        best = simplex[0]
        simplex[1:] = best + sigma * (simplex[1:] - best)
        values[1:] = [f(v) for v in simplex[1:]]
        nfev += n
    order = np.argsort(values, kind="stable")
    return SimplexResult(simplex[order[0]].copy(), float(values[order[0]]), it, nfev, converged, history)


def optimize_betas(init: BetaConfig, labeled_frames: Sequence[LabeledFrame], max_iter: int = 500,
                   tol: float = 1e-4, initial_step: float = 0.5) -> BetaConfig:
    """Minimize the association error over the log of the five parameters."""

    def loss(logb):
        return association_error(init.with_betas(np.exp(logb)), labeled_frames)

    x0 = np.log(init.betas)
    res = nelder_mead(loss, x0, initial_step=initial_step, max_iter=max_iter, tol=tol, lower_bound=0.0)
    logger.info("nelder-mead: %d iterations, %d evaluations, error %.4f", res.nit, res.nfev, res.fun)
    if np.array_equal(res.x, x0):
        return init
    return init.with_betas(np.exp(res.x))
