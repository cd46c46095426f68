"""Probabilistic association cost and thresholded Hungarian assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .state import BetaConfig, Detection, TrackletPrediction

BIG = 1e12


def posterior_appearance(delta_a: float, beta_a: float) -> float:
    """Cauchy-shaped posterior ``1 / (1 + beta_a * delta_a)`` for squared embedding distance."""
    return 1.0 / (1.0 + beta_a * delta_a)


def posterior_pose(delta_p: float, beta_p: float) -> float:
    return 1.0 / (1.0 + beta_p * delta_p)


NORMALIZERS = ("beta", "scale", "none")


def _exp_density(delta: float, interval: float, beta: float, normalizer: str) -> float:
    scale = beta * interval
    if normalizer not in NORMALIZERS:
        raise ValueError(f"normalizer must be one of {NORMALIZERS}, got {normalizer!r}")
    denom = {"beta": beta, "scale": scale, "none": 1.0}[normalizer]
    return math.exp(-delta / scale) / denom


def posterior_xy(delta_xy: float, interval_xy: float, beta_xy: float, normalizer: str = "beta") -> float:
    """Exponential posterior ``exp(-delta / (beta * interval)) / beta`` in pixel distance.

    ``normalizer="scale"`` divides by ``beta * interval`` instead, the factor
    the cost keeps with ``normalized_cost``; ``"none"`` pairs with a cost
    built without it.
    """
    return _exp_density(delta_xy, interval_xy, beta_xy, normalizer)


def posterior_nearness(delta_n: float, interval_n: float, beta_n: float, normalizer: str = "beta") -> float:
    return _exp_density(delta_n, interval_n, beta_n, normalizer)


@dataclass
class PairDistances:
    """Cue distances for every (track, detection) pair, all shaped ``[T, D]``."""

    appearance: np.ndarray
    pose: np.ndarray
    xy: np.ndarray
    interval_xy: np.ndarray
    nearness: np.ndarray
    interval_n: np.ndarray
    # rows without a usable location forecast (e.g. history cleared at a shot cut)
    has_location: np.ndarray

    @property
    def shape(self):
        return self.appearance.shape

    def row(self, i: int) -> "PairDistances":
        return PairDistances(*(getattr(self, f)[i : i + 1] for f in self.__dataclass_fields__))

    @classmethod
    def empty(cls, num_tracks: int, num_dets: int) -> "PairDistances":
        z = np.zeros((num_tracks, num_dets))
        return cls(z, z, z, np.ones_like(z), z, np.ones_like(z), np.ones((num_tracks, 1), dtype=bool))


def pair_distances(preds: Sequence[TrackletPrediction], det_appearance: np.ndarray,
                   det_pose: np.ndarray, det_loc: np.ndarray) -> PairDistances:
    """Distances between forecasts and detections.

    ``det_appearance`` is ``[D, D_a]``, ``det_pose`` ``[D, D_p]`` and
    ``det_loc`` ``[D, 3]`` holding ``(x, y, n)``.
    """
    T, D = len(preds), len(det_loc)
    if T == 0 or D == 0:
        return PairDistances.empty(T, D)
    pa = np.stack([p.appearance_embedding for p in preds])
    pp = np.stack([p.pose_embedding for p in preds])
    pl = np.stack([p.location for p in preds])
    iv = np.stack([p.intervals for p in preds])
    has_loc = np.array([p.has_location for p in preds])[:, None]

    def sqdist(a, b):
        if a.shape[1] != b.shape[1]:
            return np.full((len(a), len(b)), np.inf)
        diff = a[:, None, :] - b[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)

    d_xy = np.hypot(pl[:, None, 0] - det_loc[None, :, 0], pl[:, None, 1] - det_loc[None, :, 1])
    d_n = np.abs(pl[:, None, 2] - det_loc[None, :, 2])
    ixy = np.broadcast_to(np.hypot(iv[:, 0], iv[:, 1])[:, None], (T, D))
    i_n = np.broadcast_to(iv[:, 2][:, None], (T, D))
    return PairDistances(sqdist(pa, det_appearance), sqdist(pp, det_pose), d_xy, ixy, d_n, i_n, has_loc)


def cost_from_distances(dist: PairDistances, cfg: BetaConfig, shot_mode: bool = False) -> np.ndarray:
    """Negative log of the product of cue posteriors, elementwise over pairs.

    Shot mode keeps only the appearance and pose terms. Disabled cues
    contribute nothing. With ``cfg.normalized_cost`` the ``log(beta * interval)``
    normalizers of the exponential terms are kept, since intervals differ per pair.
    """
    cost = np.zeros(dist.shape)
    cues = cfg.cues
    with np.errstate(invalid="ignore", over="ignore"):
        if "appearance" in cues:
            cost += np.log1p(cfg.beta_a * dist.appearance)
        if "pose" in cues:
            cost += np.log1p(cfg.beta_p * dist.pose)
        if not shot_mode:
            loc = np.zeros(dist.shape)
            if "xy" in cues:
                scale = cfg.beta_xy * dist.interval_xy
                loc += dist.xy / scale
                if cfg.normalized_cost:
                    loc += np.log(scale)
            if "nearness" in cues:
                scale = cfg.beta_n * dist.interval_n
                loc += dist.nearness / scale
                if cfg.normalized_cost:
                    loc += np.log(scale)
            cost += np.where(dist.has_location, loc, 0.0)
    return np.where(np.isfinite(cost), cost, BIG)


def cost(pred: TrackletPrediction, d: Detection, cfg: BetaConfig, shot_mode: bool = False,
         det_appearance=None) -> float:
    """Association cost of a single forecast/detection pair."""
    app = d.appearance_embedding if det_appearance is None else det_appearance
    dist = pair_distances([pred], app[None, :], d.pose_embedding[None, :],
                          d.location.as_array()[None, :])
    return float(cost_from_distances(dist, cfg, shot_mode)[0, 0])


@dataclass
class CostMatrix:
    costs: np.ndarray
    track_ids: List[int]
    detection_ids: List[str]
    shot_mode: bool = False

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=float).reshape(len(self.track_ids), len(self.detection_ids))


@dataclass
class Assignment:
    matches: List[Tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: List[int] = field(default_factory=list)
    unmatched_detections: List[int] = field(default_factory=list)


def solve_assignment(C, beta_th: float) -> Assignment:
    """Globally optimal matching where leaving a pair unmatched costs ``beta_th``.

    Each track and each detection gets a private "unmatched" slot costing
    ``beta_th / 2``, so a pair is only ever matched when its cost is at most
    ``beta_th``. ``C`` may be a :class:`CostMatrix` or a plain ``[T, D]`` array.
    """
    costs = C.costs if isinstance(C, CostMatrix) else np.asarray(C, dtype=float)
    if costs.ndim != 2:
        costs = costs.reshape(0, 0) if costs.size == 0 else np.atleast_2d(costs)
    T, D = costs.shape
    if T == 0 or D == 0:
        return Assignment([], list(range(T)), list(range(D)))
    costs = np.where(np.isfinite(costs), np.minimum(costs, BIG), BIG)
    half = beta_th / 2.0
    n = T + D
    aug = np.full((n, n), BIG)
    aug[:T, :D] = costs
    aug[:T, D:][np.arange(T), np.arange(T)] = half
    aug[T:, :D][np.arange(D), np.arange(D)] = half
    aug[T:, D:] = 0.0
    rows, cols = linear_sum_assignment(aug)
    matches = []
    matched_t, matched_d = set(), set()
    for r, c in zip(rows, cols):
        if r < T and c < D and costs[r, c] <= beta_th:
            matches.append((int(r), int(c)))
            matched_t.add(r)
            matched_d.add(c)
    return Assignment(
        matches,
        [i for i in range(T) if i not in matched_t],
        [j for j in range(D) if j not in matched_d],
    )
