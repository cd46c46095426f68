"""Domain types shared across the tracking engine and tracklet bookkeeping."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Optional, Tuple, Union

import numpy as np

Array = np.ndarray


class InputError(ValueError):
    """Malformed or out-of-contract input (bad file rows, invalid config, ...)."""


@dataclass
class AppearanceMap:
    """UV texture image plus per-pixel visibility.

    ``texture`` is ``[3, H, W]`` and ``visibility`` is ``[1, H, W]``, both in [0, 1].
    """

    texture: Array
    visibility: Array

    def __post_init__(self):
        self.texture = np.asarray(self.texture, dtype=float)
        self.visibility = np.asarray(self.visibility, dtype=float)
        if self.texture.ndim != 3 or self.texture.shape[0] != 3:
            raise InputError(f"texture must be [3, H, W], got {self.texture.shape}")
        if self.visibility.shape != (1,) + self.texture.shape[1:]:
            raise InputError(
                f"visibility shape {self.visibility.shape} does not match texture {self.texture.shape}"
            )
        if np.any(self.visibility < 0) or np.any(self.visibility > 1):
            raise InputError("visibility values must lie in [0, 1]")

    @property
    def size(self) -> Tuple[int, int]:
        return self.texture.shape[1], self.texture.shape[2]

    def stacked(self) -> Array:
        """The ``[4, H, W]`` concatenation of texture and visibility."""
        return np.concatenate([self.texture, self.visibility], axis=0)

    @classmethod
    def from_stacked(cls, arr: Array) -> "AppearanceMap":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 3 or arr.shape[0] != 4:
            raise InputError(f"stacked appearance map must be [4, H, W], got {arr.shape}")
        return cls(arr[:3].copy(), arr[3:].copy())

    def copy(self) -> "AppearanceMap":
        return AppearanceMap(self.texture.copy(), self.visibility.copy())


@dataclass(frozen=True)
class Location3D:
    """Root location: pixel ``(x, y)``, nearness ``n = -ln z`` and depth ``z``."""

    x: float
    y: float
    n: float
    z: float

    def __post_init__(self):
        if not self.z > 0:
            raise InputError(f"depth must be positive, got z={self.z}")
        if abs(self.n + math.log(self.z)) > 1e-9 * max(1.0, abs(self.n)):
            raise InputError(f"nearness {self.n} inconsistent with depth {self.z}")

    @classmethod
    def from_depth(cls, x: float, y: float, z: float) -> "Location3D":
        if not z > 0:
            raise InputError(f"depth must be positive, got z={z}")
        return cls(float(x), float(y), -math.log(z), float(z))

    @classmethod
    def from_nearness(cls, x: float, y: float, n: float) -> "Location3D":
        return cls(float(x), float(y), float(n), math.exp(-n))

    def as_array(self) -> Array:
        return np.array([self.x, self.y, self.n])


@dataclass
class Detection:
    frame_index: int
    bbox: Tuple[float, float, float, float]
    pose_embedding: Array
    location: Location3D
    detection_id: str
    appearance_embedding: Optional[Array] = None
    appearance_map: Optional[AppearanceMap] = None
    # Precomputed future poses (rows = 1..c frames ahead), used by the external pose backend.
    pred_pose: Optional[Array] = None

    def __post_init__(self):
        if self.frame_index < 0:
            raise InputError(f"frame index must be >= 0, got {self.frame_index}")
        if len(self.bbox) != 4:
            raise InputError("bbox must have 4 entries (x_min, y_min, width, height)")
        self.bbox = tuple(float(v) for v in self.bbox)
        if not (self.bbox[2] > 0 and self.bbox[3] > 0):
            raise InputError(f"bbox width/height must be positive, got {self.bbox}")
        if self.appearance_embedding is None and self.appearance_map is None:
            raise InputError(f"detection {self.detection_id} has no appearance")
        self.pose_embedding = np.asarray(self.pose_embedding, dtype=float).ravel()
        if self.appearance_embedding is not None:
            self.appearance_embedding = np.asarray(self.appearance_embedding, dtype=float).ravel()
        if self.pred_pose is not None:
            self.pred_pose = np.atleast_2d(np.asarray(self.pred_pose, dtype=float))


@dataclass
class BetaConfig:
    """Association parameters plus the knobs of the prediction models."""

    # defaults fitted with experiments.fit_config on crowd seeds 100-109
    beta_a: float = 16.0
    beta_p: float = 1.82
    beta_xy: float = 0.78
    beta_n: float = 0.99
    beta_th: float = 9.55
    alpha_0: float = 0.1
    w: int = 20
    confidence: float = 0.95
    t_max: int = 24
    c: int = 12
    pose_window: int = 12
    pose_backend: str = "linear_extrapolation"
    floor_xy: float = 5.0
    floor_n: float = 0.1
    normalized_cost: bool = True
    cues: Tuple[str, ...] = ("appearance", "pose", "xy", "nearness")

    CUES = ("appearance", "pose", "xy", "nearness")

    def __post_init__(self):
        self.cues = tuple(self.cues)
        for name in ("beta_a", "beta_p", "beta_xy", "beta_n", "beta_th", "floor_xy", "floor_n"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be a positive finite number, got {v}")
        if not 0 < self.alpha_0 <= 1:
            raise InputError(f"alpha_0 must lie in (0, 1], got {self.alpha_0}")
        if not 0 < self.confidence < 1:
            raise InputError(f"confidence must lie in (0, 1), got {self.confidence}")
        if int(self.w) != self.w or self.w < 2:
            raise InputError(f"w must be an integer >= 2, got {self.w}")
        for name in ("t_max", "c", "pose_window"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InputError(f"{name} must be an integer >= 1, got {v}")
        if self.pose_backend not in ("last_value", "linear_extrapolation", "external"):
            raise InputError(f"unknown pose backend {self.pose_backend!r}")
        unknown = set(self.cues) - set(self.CUES)
        if unknown:
            raise InputError(f"unknown cues {sorted(unknown)}")

    @property
    def betas(self) -> Array:
        return np.array([self.beta_a, self.beta_p, self.beta_xy, self.beta_n, self.beta_th])

    def with_betas(self, betas) -> "BetaConfig":
        from dataclasses import replace

        a, p, xy, n, th = (float(b) for b in betas)
        return replace(self, beta_a=a, beta_p=p, beta_xy=xy, beta_n=n, beta_th=th)

    def without(self, *cues: str) -> "BetaConfig":
        from dataclasses import replace

        return replace(self, cues=tuple(c for c in self.cues if c not in cues))


@dataclass
class TrackletPrediction:
    appearance_embedding: Array
    pose_embedding: Array
    location: Array  # (x, y, n)
    intervals: Array  # (dx, dy, dn)
    has_location: bool = True

    @property
    def delta_xy(self) -> float:
        return math.hypot(self.intervals[0], self.intervals[1])

    @property
    def delta_n(self) -> float:
        return float(self.intervals[2])


@dataclass
class Tracklet:
    track_id: int
    appearance_state: Union[AppearanceMap, Array]
    location_history: Deque[Tuple[int, Location3D]]
    pose_history: Deque[Tuple[int, Array]]
    age: int = 0
    alive: bool = True
    hits: int = 1
    # Visibility flag of the aggregated embedding (embedding form only).
    appearance_visible: bool = True
    pred_pose: Optional[Array] = None
    pred_pose_frame: int = -1
    last_frame: int = field(default=-1)

    @property
    def uses_map(self) -> bool:
        return isinstance(self.appearance_state, AppearanceMap)


def spawn_tracklet(d: Detection, next_id: int, cfg: Optional[BetaConfig] = None) -> Tracklet:
    """Start a new tracklet from an unmatched detection."""
    cfg = cfg or BetaConfig()
    if d.appearance_map is not None:
        appearance = d.appearance_map.copy()
    else:
        appearance = d.appearance_embedding.copy()
    loc_hist = deque([(d.frame_index, d.location)], maxlen=cfg.w)
    pose_hist = deque([(d.frame_index, d.pose_embedding.copy())], maxlen=max(2 * cfg.c, cfg.w))
    return Tracklet(
        track_id=next_id,
        appearance_state=appearance,
        location_history=loc_hist,
        pose_history=pose_hist,
        pred_pose=d.pred_pose,
        pred_pose_frame=d.frame_index,
        last_frame=d.frame_index,
    )


def touch_tracklet(t: Tracklet, d: Detection, cfg: Optional[BetaConfig] = None) -> Tracklet:
    """Update a tracklet with its matched detection (in place; returned for chaining)."""
    from .appearance import aggregate, aggregate_embedding

    cfg = cfg or BetaConfig()
    if d.frame_index <= t.last_frame:
        raise InputError(
            f"detection frame {d.frame_index} is not after track {t.track_id}'s last frame {t.last_frame}"
        )
    if t.uses_map and d.appearance_map is not None:
        t.appearance_state = aggregate(t.appearance_state, d.appearance_map, cfg.alpha_0)
    elif not t.uses_map and d.appearance_embedding is not None:
        t.appearance_state, t.appearance_visible = aggregate_embedding(
            t.appearance_state, t.appearance_visible, d.appearance_embedding, True, cfg.alpha_0
        )
    else:
        raise InputError("detection appearance form does not match the tracklet's")
    t.location_history.append((d.frame_index, d.location))
    t.pose_history.append((d.frame_index, d.pose_embedding.copy()))
    if d.pred_pose is not None:
        t.pred_pose, t.pred_pose_frame = d.pred_pose, d.frame_index
    t.last_frame = d.frame_index
    t.age = 0
    t.hits += 1
    return t


def age_and_reap(tracks, t_max: int, steps: int = 1):
    """Age unmatched tracks by ``steps`` frames and split off the ones that reached ``t_max``."""
    alive, killed = [], []
    for t in tracks:
        t.age += steps
        if t.age >= t_max:
            t.alive = False
            killed.append(t)
        else:
            alive.append(t)
    return alive, killed
