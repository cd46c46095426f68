"""Synthetic ground-truth worlds: piecewise-linear 3D agents seen by a pinhole camera.

Random numbers come from numpy's PCG64 bit generator. A scenario's seed feeds
``np.random.SeedSequence(seed).spawn(2)``: the first child builds the preset's
random structure (crowd layouts), the second drives rendering. Rendering
draws, per frame in ascending order: for each agent in id order that is
on screen and not occluded, one uniform (miss test) and then one normal
vector of length ``3 + D_a + D_p`` (x, y, nearness, appearance, pose noise),
both drawn even when the detection is missed; then a Poisson clutter count,
and per clutter detection: uniform x, uniform y, uniform depth, normal
appearance, normal pose.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .state import Detection, InputError, Location3D

RNG_ALGORITHM = "numpy PCG64 via SeedSequence(seed).spawn(2); child 0 = structure, child 1 = rendering"
PERSON_HEIGHT = 1.7
BOX_ASPECT = 0.4


@dataclass(frozen=True)
class Camera:
    f: float = 1000.0
    cx: float = 640.0
    cy: float = 360.0
    width: int = 1280
    height: int = 720


@dataclass(frozen=True)
class CameraPose:
    """Camera placement from ``start_frame`` on: yaw about the vertical axis and world position."""

    start_frame: int = 0
    yaw: float = 0.0
    position: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def to_camera(self, p: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        d = np.asarray(p, dtype=float) - np.asarray(self.position)
        # inverse rotation of a camera yawed by +yaw
        return np.array([c * d[0] - s * d[2], d[1], s * d[0] + c * d[2]])


@dataclass(frozen=True)
class NoiseModel:
    sigma_xy: float = 0.0
    sigma_n: float = 0.0
    sigma_a: float = 0.0
    sigma_p: float = 0.0
    p_miss: float = 0.0
    clutter_rate: float = 0.0


DEFAULT_NOISE = NoiseModel(sigma_xy=1.5, sigma_n=0.01, sigma_a=0.05, sigma_p=0.15,
                           p_miss=0.02, clutter_rate=0.1)
# measurement noise only: every visible agent is detected and nothing else is
SENSOR_NOISE = NoiseModel(sigma_xy=1.5, sigma_n=0.01, sigma_a=0.05, sigma_p=0.15)


@dataclass
class Agent:
    id: int
    waypoints: np.ndarray  # rows (frame, X, Y, Z), frames ascending
    appearance: np.ndarray
    pose_base: np.ndarray
    pose_amp: np.ndarray
    pose_phase: np.ndarray
    pose_omega: float = 0.05

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        if np.any(np.diff(self.waypoints[:, 0]) <= 0):
            raise InputError(f"agent {self.id} waypoints must have increasing frames")

    @property
    def span(self) -> Tuple[int, int]:
        return int(math.ceil(self.waypoints[0, 0])), int(math.floor(self.waypoints[-1, 0]))

    def position(self, frame: int) -> Optional[np.ndarray]:
        lo, hi = self.span
        if frame < lo or frame > hi:
            return None
        wp = self.waypoints
        return np.array([np.interp(frame, wp[:, 0], wp[:, k]) for k in (1, 2, 3)])

    def pose(self, frame: int) -> np.ndarray:
        return self.pose_base + self.pose_amp * np.sin(self.pose_omega * frame + self.pose_phase)


@dataclass
class Scenario:
    name: str
    agents: List[Agent]
    num_frames: int
    seed: int = 0
    camera: Camera = field(default_factory=Camera)
    camera_poses: List[CameraPose] = field(default_factory=lambda: [CameraPose()])
    occlusions: Dict[int, List[Tuple[int, int]]] = field(default_factory=dict)
    noise: NoiseModel = field(default_factory=NoiseModel)

    @property
    def shot_frames(self) -> List[int]:
        return [p.start_frame for p in self.camera_poses[1:]]

    def camera_pose(self, frame: int) -> CameraPose:
        pose = self.camera_poses[0]
        for p in self.camera_poses:
            if p.start_frame <= frame:
                pose = p
        return pose

    def occluded(self, agent_id: int, frame: int) -> bool:
        return any(a <= frame <= b for a, b in self.occlusions.get(agent_id, ()))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "rng": RNG_ALGORITHM,
            "num_frames": self.num_frames,
            "num_agents": len(self.agents),
            "shot_frames": self.shot_frames,
            "occlusions": {str(k): [list(v) for v in vs] for k, vs in sorted(self.occlusions.items())},
            "noise": asdict(self.noise),
        }


def project(cam: Camera, pc: np.ndarray) -> Tuple[float, float]:
    """Pinhole projection of a camera-frame point."""
    return cam.f * pc[0] / pc[2] + cam.cx, cam.f * pc[1] / pc[2] + cam.cy


def box_at(cam: Camera, x: float, y: float, z: float):
    h = cam.f * PERSON_HEIGHT / z
    w = BOX_ASPECT * h
    return (x - w / 2.0, y - h / 2.0, w, h)


def render_detections(s: Scenario):
    """Emit the detection stream, ground-truth rows and shot frames of a scenario.

    Returns ``(frames, gt_rows, shot_frames)`` where ``frames`` is a list of
    ``(frame_index, [Detection])`` covering every frame (possibly empty) and
    ``gt_rows`` holds one dict per visible agent per frame plus one per
    clutter detection (``gt_id == -1``).
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(s.seed).spawn(2)[1]))
    cam, nz = s.camera, s.noise
    d_a = len(s.agents[0].appearance) if s.agents else 16
    d_p = len(s.agents[0].pose_base) if s.agents else 8
    frames, gt = [], []
    for f in range(s.num_frames):
        pose_cam = s.camera_pose(f)
        dets: List[Detection] = []
        for agent in s.agents:
            p = agent.position(f)
            if p is None or s.occluded(agent.id, f):
                continue
            pc = pose_cam.to_camera(p)
            if pc[2] <= 0:
                raise InputError(f"agent {agent.id} is behind the camera at frame {f}")
            x, y = project(cam, pc)
            z = pc[2]
            u = rng.random()
            noise = rng.standard_normal(3 + d_a + d_p)
            row = {"frame": f, "id": None, "gt_id": agent.id, "bbox": box_at(cam, x, y, z),
                   "x": x, "y": y, "z": z}
            if u >= nz.p_miss:
                xn = x + nz.sigma_xy * noise[0]
                yn = y + nz.sigma_xy * noise[1]
                n = -math.log(z) + nz.sigma_n * noise[2]
                det_id = f"{f}:{len(dets)}"
                dets.append(Detection(
                    frame_index=f,
                    bbox=box_at(cam, xn, yn, z),
                    pose_embedding=agent.pose(f) + nz.sigma_p * noise[3 + d_a:],
                    location=Location3D.from_nearness(xn, yn, n),
                    detection_id=det_id,
                    appearance_embedding=agent.appearance + nz.sigma_a * noise[3:3 + d_a],
                ))
                row["id"] = det_id
            gt.append(row)
        for _ in range(rng.poisson(nz.clutter_rate) if nz.clutter_rate > 0 else 0):
            x = rng.uniform(0, cam.width)
            y = rng.uniform(0, cam.height)
            z = rng.uniform(3.0, 15.0)
            app = rng.standard_normal(d_a) / math.sqrt(d_a)
            pose = rng.standard_normal(d_p) / math.sqrt(d_p)
            det_id = f"{f}:{len(dets)}"
            det = Detection(f, box_at(cam, x, y, z), pose, Location3D.from_depth(x, y, z), det_id,
                            appearance_embedding=app)
            dets.append(det)
            gt.append({"frame": f, "id": det_id, "gt_id": -1, "bbox": det.bbox, "x": x, "y": y, "z": z})
        frames.append((f, dets))
    return frames, gt, s.shot_frames


# presets ---------------------------------------------------------------------

def _signature(rng, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _agent(rng, aid, waypoints, d_a=16, d_p=8, appearance=None) -> Agent:
    return Agent(
        id=aid,
        waypoints=np.asarray(waypoints, dtype=float),
        appearance=_signature(rng, d_a) if appearance is None else np.asarray(appearance, dtype=float),
        pose_base=0.3 * _signature(rng, d_p),
        pose_amp=0.15 * rng.uniform(0.5, 1.0, d_p),
        pose_phase=rng.uniform(0, 2 * math.pi, d_p),
    )


def _structure_rng(seed: int):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed).spawn(2)[0]))


def crossing(seed: int = 0, noise: NoiseModel = DEFAULT_NOISE, num_frames: int = 60) -> Scenario:
    """Two agents at equal depth walking through each other; appearance must carry identity."""
    rng = _structure_rng(seed)
    end = num_frames - 1
    agents = [
        _agent(rng, 0, [(0, -2.0, 0.6, 8.0), (end, 2.0, 0.6, 8.0)]),
        _agent(rng, 1, [(0, 2.0, 0.6, 8.0), (end, -2.0, 0.6, 8.0)]),
    ]
    return Scenario("crossing", agents, num_frames, seed, noise=noise)


def occlusion(seed: int = 0, gap: int = 23, noise: NoiseModel = DEFAULT_NOISE, start: int = 20) -> Scenario:
    """One approaching agent vanishes for ``gap`` frames and reappears on its 3D line.

    A second, static agent stands elsewhere as a distractor.
    """
    rng = _structure_rng(seed)
    num_frames = start + gap + 20
    end = num_frames - 1
    agents = [
        _agent(rng, 0, [(0, -2.5, 0.6, 10.0), (end, 1.5, 0.6, 7.0)]),
        _agent(rng, 1, [(0, 2.5, 0.6, 9.0), (end, 2.6, 0.6, 9.0)]),
    ]
    occ = {0: [(start, start + gap - 1)]} if gap > 0 else {}
    return Scenario("occlusion", agents, num_frames, seed, occlusions=occ, noise=noise)


def appearance_twins(seed: int = 0, noise: NoiseModel = DEFAULT_NOISE, num_frames: int = 60) -> Scenario:
    """Two identically dressed agents walking side by side; only location and pose separate them."""
    rng = _structure_rng(seed)
    end = num_frames - 1
    sig = _signature(rng, 16)
    agents = [
        _agent(rng, 0, [(0, -2.0, 0.6, 8.0), (end, 1.0, 0.6, 8.0)], appearance=sig),
        _agent(rng, 1, [(0, -1.0, 0.6, 8.0), (end, 2.0, 0.6, 8.0)], appearance=sig),
    ]
    return Scenario("appearance_twins", agents, num_frames, seed, noise=noise)


def shot_cut(seed: int = 0, cut: int = 30, noise: NoiseModel = DEFAULT_NOISE, num_frames: int = 60) -> Scenario:
    """Three agents; at ``cut`` the camera yaws and moves, so every pixel track jumps."""
    rng = _structure_rng(seed)
    end = num_frames - 1
    agents = [
        _agent(rng, 0, [(0, -2.0, 0.6, 8.0), (end, -0.5, 0.6, 8.0)]),
        _agent(rng, 1, [(0, 0.0, 0.6, 10.0), (end, 1.0, 0.6, 9.0)]),
        _agent(rng, 2, [(0, 2.5, 0.6, 7.0), (end, 1.5, 0.6, 7.5)]),
    ]
    poses = [CameraPose(0), CameraPose(cut, yaw=0.35, position=(1.0, 0.0, -1.0))]
    return Scenario("shot_cut", agents, num_frames, seed, camera_poses=poses, noise=noise)


def crowd(seed: int = 0, k: int = 6, noise: NoiseModel = DEFAULT_NOISE, num_frames: int = 150,
          twin_pairs: int = 2) -> Scenario:
    """``k`` agents in pairs that walk through each other.

    Within a pair the farther agent is hidden behind the nearer one for a few
    frames around the crossing and both bend their path there. The first
    ``twin_pairs`` pairs are identically dressed and cross at clearly
    different depths; the other pairs cross at nearly equal depth. Paths of
    different pairs overlap too, since they share one stretch of floor.
    """
    rng = _structure_rng(seed)
    end = num_frames - 1
    agents, occ = [], {}
    for p in range(k // 2):
        t_cross = float(rng.integers(num_frames // 4, 3 * num_frames // 4))
        x_cross = rng.uniform(-1.5, 1.5)
        z_near = rng.uniform(6.0, 8.0)
        twins = p < twin_pairs
        z_far = z_near + (rng.uniform(1.5, 3.0) if twins else rng.uniform(0.2, 0.5))
        sig = _signature(rng, 16) if twins else None
        ids = (2 * p, 2 * p + 1)
        for aid, z, direction in ((ids[0], z_near, 1.0), (ids[1], z_far, -1.0)):
            v_in = direction * rng.uniform(0.025, 0.045)
            v_out = v_in * rng.uniform(0.6, 1.4)
            dz_in, dz_out = rng.uniform(-0.01, 0.01, 2)
            pts = [
                (0, x_cross - v_in * t_cross, 0.6, z - dz_in * t_cross),
                (t_cross, x_cross, 0.6, z),
                (end, x_cross + v_out * (end - t_cross), 0.6, z + dz_out * (end - t_cross)),
            ]
            agents.append(_agent(rng, aid, pts, appearance=sig))
        h = int(rng.integers(2, 7))
        occ[ids[1]] = [(int(t_cross) - h, int(t_cross) + h)]
    if k % 2:
        agents.append(_agent(rng, k - 1, [(0, rng.uniform(-3, 3), 0.6, rng.uniform(6, 11)),
                                           (end, rng.uniform(-3, 3), 0.6, rng.uniform(6, 11))]))
    return Scenario(f"crowd{k}", agents, num_frames, seed, occlusions=occ, noise=noise)


PRESETS = {
    "crossing": crossing,
    "occlusion": occlusion,
    "appearance_twins": appearance_twins,
    "shot_cut": shot_cut,
    "crowd": crowd,
}


def make_preset(name: str, seed: int = 0, **kwargs) -> Scenario:
    if name.startswith("crowd") and name[5:].isdigit():
        kwargs.setdefault("k", int(name[5:]))
        name = "crowd"
    try:
        factory = PRESETS[name]
    except KeyError:
        raise InputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(seed=seed, **kwargs)
