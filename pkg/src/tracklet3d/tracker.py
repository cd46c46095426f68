"""Online tracking loop: predict, score, assign, update, age and spawn per frame."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .appearance import AppearanceEncoder, detection_embedding, predict_appearance
from .association import CostMatrix, cost_from_distances, pair_distances, solve_assignment
from .location import forecast_location
from .pose import PosePredictor, clamp_target, predict_pose
from .state import (
    BetaConfig,
    Detection,
    InputError,
    Tracklet,
    TrackletPrediction,
    age_and_reap,
    spawn_tracklet,
    touch_tracklet,
)

logger = logging.getLogger(__name__)

# Exact fits give zero-width intervals; the cost divides by them.
MIN_INTERVAL_XY = 1e-3
MIN_INTERVAL_N = 1e-6


def predict_tracklet(t: Tracklet, frame: int, cfg: BetaConfig, enc: AppearanceEncoder,
                     posep: PosePredictor) -> Tuple[TrackletPrediction, bool]:
    """Forecast a tracklet at ``frame``; also reports whether the pose horizon was clamped."""
    app = predict_appearance(t, enc)
    last_pose_frame = t.pose_history[-1][0]
    _, clamped = clamp_target(last_pose_frame, frame, posep.horizon)
    pose = predict_pose(t.pose_history, frame, posep, external=(t.pred_pose_frame, t.pred_pose))
    if t.location_history:
        loc, deltas = forecast_location(t, frame, cfg)
        deltas = np.maximum(deltas, [MIN_INTERVAL_XY, MIN_INTERVAL_XY, MIN_INTERVAL_N])
        return TrackletPrediction(app, pose, loc, deltas), clamped
    return TrackletPrediction(app, pose, np.zeros(3), np.ones(3), has_location=False), clamped


def detection_arrays(dets: Sequence[Detection], enc: AppearanceEncoder):
    if not dets:
        return np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((0, 3))
    app = np.stack([detection_embedding(d, enc) for d in dets])
    pose = np.stack([d.pose_embedding for d in dets])
    loc = np.stack([d.location.as_array() for d in dets])
    return app, pose, loc


@dataclass
class FrameDiagnostics:
    frame: int
    shot_mode: bool
    num_tracks: int
    num_detections: int
    match_costs: List[float] = field(default_factory=list)
    spawned: int = 0
    killed: int = 0
    pose_clamped: int = 0


@dataclass
class TrackRecord:
    frame: int
    detection_id: str
    track_id: int
    cost: Optional[float]
    matched: bool
    bbox: Tuple[float, float, float, float]
    shot_mode: bool = False


@dataclass
class TrackOutput:
    records: List[TrackRecord]
    tracklets: List[dict]
    diagnostics: List[FrameDiagnostics]

    @property
    def labels(self) -> Dict[str, int]:
        return {r.detection_id: r.track_id for r in self.records}


@dataclass
class TrackerSession:
    cfg: BetaConfig = field(default_factory=BetaConfig)
    shot_boundaries: Set[int] = field(default_factory=set)
    encoder: AppearanceEncoder = field(default_factory=AppearanceEncoder)
    tracklets: List[Tracklet] = field(default_factory=list)
    next_id: int = 0
    frame_cursor: int = -1
    killed: List[Tracklet] = field(default_factory=list)
    diagnostics: List[FrameDiagnostics] = field(default_factory=list)
    records: List[TrackRecord] = field(default_factory=list)

    @property
    def pose_predictor(self) -> PosePredictor:
        return PosePredictor(self.cfg.pose_backend, self.cfg.c, self.cfg.pose_window)

    def _crossed_boundary(self, frame_index: int) -> bool:
        return any(self.frame_cursor < b <= frame_index for b in self.shot_boundaries)

    def step(self, frame_index: int, detections: Sequence[Detection]) -> List[Tuple[str, int]]:
        """Process one frame; returns ``(detection_id, track_id)`` for every detection."""
        if frame_index <= self.frame_cursor:
            raise InputError(f"frame {frame_index} is not after frame {self.frame_cursor}")
        for d in detections:
            if d.frame_index != frame_index:
                raise InputError(f"detection {d.detection_id} has frame {d.frame_index}, expected {frame_index}")
        cfg = self.cfg
        shot_mode = self._crossed_boundary(frame_index)
        if shot_mode:
            # pixel coordinates from the previous camera are meaningless after a cut
            for t in self.tracklets:
                t.location_history.clear()

        posep = self.pose_predictor
        preds, clamped = [], 0
        for t in self.tracklets:
            p, c = predict_tracklet(t, frame_index, cfg, self.encoder, posep)
            preds.append(p)
            clamped += c
        app, pose, loc = detection_arrays(detections, self.encoder)
        dist = pair_distances(preds, app, pose, loc)
        C = CostMatrix(cost_from_distances(dist, cfg, shot_mode),
                       [t.track_id for t in self.tracklets],
                       [d.detection_id for d in detections], shot_mode)
        result = solve_assignment(C, cfg.beta_th)

        diag = FrameDiagnostics(frame_index, shot_mode, len(self.tracklets), len(detections),
                                pose_clamped=clamped)
        labels: Dict[int, Tuple[int, Optional[float], bool]] = {}
        for i, j in result.matches:
            t = self.tracklets[i]
            touch_tracklet(t, detections[j], cfg)
            c = float(C.costs[i, j])
            labels[j] = (t.track_id, c, True)
            diag.match_costs.append(c)

        unmatched = [self.tracklets[i] for i in result.unmatched_tracks]
        steps = frame_index - self.frame_cursor if self.frame_cursor >= 0 else 1
        alive, killed = age_and_reap(unmatched, cfg.t_max, steps)
        matched = [self.tracklets[i] for i, _ in result.matches]
        self.tracklets = sorted(matched + alive, key=lambda t: t.track_id)
        self.killed.extend(killed)
        diag.killed = len(killed)

        for j in result.unmatched_detections:
            t = spawn_tracklet(detections[j], self.next_id, cfg)
            labels[j] = (t.track_id, None, False)
            self.tracklets.append(t)
            self.next_id += 1
            diag.spawned += 1

        self.frame_cursor = frame_index
        self.diagnostics.append(diag)
        out = []
        for j, d in enumerate(detections):
            tid, c, m = labels[j]
            self.records.append(TrackRecord(frame_index, d.detection_id, tid, c, m, d.bbox, shot_mode))
            out.append((d.detection_id, tid))
        return out

    def summaries(self) -> List[dict]:
        rows = []
        for t in sorted(self.tracklets + self.killed, key=lambda t: t.track_id):
            rows.append({"track_id": t.track_id, "hits": t.hits, "last_frame": t.last_frame,
                         "age": t.age, "alive": t.alive})
        return rows


def run(session: TrackerSession, frames: Iterable[Tuple[int, Sequence[Detection]]]) -> TrackOutput:
    """Drive :meth:`TrackerSession.step` over a frame-grouped detection stream."""
    for frame_index, dets in frames:
        session.step(frame_index, dets)
    return TrackOutput(list(session.records), session.summaries(), list(session.diagnostics))
