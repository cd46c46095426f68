"""Line-delimited JSON formats: detections, track output, ground truth, config and reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, fields
from itertools import groupby
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .location import to_nearness
from .state import AppearanceMap, BetaConfig, Detection, InputError, Location3D

DETECTION_KEYS = {"frame", "id", "bbox", "x", "y", "z", "n", "pose", "appearance", "uv_ref", "pred_pose"}


def fmt(v: float) -> float:
    """Round to 9 significant digits for serialization."""
    v = float(v)
    if not math.isfinite(v):
        raise InputError(f"cannot serialize non-finite value {v}")
    return float(f"{v:.9g}")


def fmt_list(vs) -> list:
    return [fmt(v) for v in np.asarray(vs, dtype=float).ravel()]


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "))


# detections ------------------------------------------------------------------

def detection_to_row(d: Detection, uv_ref: Optional[str] = None) -> dict:
    row = {
        "frame": d.frame_index,
        "id": d.detection_id,
        "bbox": fmt_list(d.bbox),
        "x": fmt(d.location.x),
        "y": fmt(d.location.y),
        "z": fmt(d.location.z),
        "pose": fmt_list(d.pose_embedding),
    }
    if uv_ref is not None:
        row["uv_ref"] = uv_ref
    elif d.appearance_embedding is not None:
        row["appearance"] = fmt_list(d.appearance_embedding)
    else:
        raise InputError(f"detection {d.detection_id} has an appearance map but no uv_ref to write it to")
    if d.pred_pose is not None:
        row["pred_pose"] = [fmt_list(r) for r in d.pred_pose]
    return row


def row_to_detection(row: dict, base_dir: Optional[Path] = None) -> Detection:
    unknown = set(row) - DETECTION_KEYS
    if unknown:
        raise InputError(f"unknown keys {sorted(unknown)}")
    missing = {"frame", "id", "bbox", "x", "y", "pose"} - set(row)
    if missing:
        raise InputError(f"missing keys {sorted(missing)}")
    if ("z" in row) == ("n" in row):
        raise InputError("exactly one of z / n must be present")
    if ("appearance" in row) == ("uv_ref" in row):
        raise InputError("exactly one of appearance / uv_ref must be present")
    frame = row["frame"]
    if not isinstance(frame, int) or isinstance(frame, bool):
        raise InputError(f"frame must be an integer, got {frame!r}")
    x, y = float(row["x"]), float(row["y"])
    if "z" in row:
        z = float(row["z"])
        loc = Location3D(x, y, to_nearness(z), z)
    else:
        loc = Location3D.from_nearness(x, y, float(row["n"]))
    app_map, app = None, None
    if "uv_ref" in row:
        path = Path(row["uv_ref"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        app_map = AppearanceMap.from_stacked(np.load(path))
    else:
        app = np.asarray(row["appearance"], dtype=float)
    pred_pose = np.asarray(row["pred_pose"], dtype=float) if row.get("pred_pose") is not None else None
    return Detection(frame, tuple(row["bbox"]), np.asarray(row["pose"], dtype=float), loc, str(row["id"]),
                     appearance_embedding=app, appearance_map=app_map, pred_pose=pred_pose)


def _read_rows(path) -> Iterator[Tuple[int, dict]]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}:{lineno}: invalid JSON ({e.msg})") from None
            if not isinstance(row, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, row


def iter_detection_frames(path) -> Iterator[Tuple[int, List[Detection]]]:
    """Stream frame groups from a detection file, enforcing ascending frame order."""
    base = Path(path).parent

    def parsed():
        last = -1
        for lineno, row in _read_rows(path):
            try:
                d = row_to_detection(row, base)
            except (InputError, TypeError, ValueError, OSError) as e:
                raise InputError(f"{path}:{lineno}: {e}") from None
            if d.frame_index < last:
                raise InputError(f"{path}:{lineno}: frame {d.frame_index} after frame {last}; rows must be sorted")
            last = d.frame_index
            yield d

    for frame, group in groupby(parsed(), key=lambda d: d.frame_index):
        yield frame, list(group)


def parse_detections(path) -> List[Tuple[int, List[Detection]]]:
    return list(iter_detection_frames(path))


def write_detections(path, frames: Iterable[Tuple[int, Sequence[Detection]]]) -> None:
    with open(path, "w") as fh:
        for _, dets in frames:
            for d in dets:
                fh.write(_dumps(detection_to_row(d)) + "\n")


# ground truth, shots, track output ---------------------------------------------

def write_ground_truth(path, rows: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for r in rows:
            out = {"frame": int(r["frame"]), "id": r["id"], "gt_id": int(r["gt_id"]),
                   "bbox": fmt_list(r["bbox"]), "x": fmt(r["x"]), "y": fmt(r["y"]), "z": fmt(r["z"])}
            fh.write(_dumps(out) + "\n")


def read_ground_truth(path) -> List[dict]:
    rows = []
    for lineno, row in _read_rows(path):
        for k in ("frame", "gt_id", "bbox"):
            if k not in row:
                raise InputError(f"{path}:{lineno}: missing key {k!r}")
        rows.append(row)
    return rows


def gt_identity_map(rows: Iterable[dict]) -> Dict[str, int]:
    """Detection id to ground-truth identity (clutter maps to -1)."""
    return {str(r["id"]): int(r["gt_id"]) for r in rows if r.get("id") is not None}


def write_shots(path, frames: Iterable[int]) -> None:
    with open(path, "w") as fh:
        for f in sorted(set(int(f) for f in frames)):
            fh.write(f"{f}\n")


def read_shots(path) -> List[int]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise InputError(f"{path}:{lineno}: shot boundary must be an integer frame index") from None
    return sorted(set(out))


def track_record_to_row(r) -> dict:
    return {
        "frame": r.frame,
        "detection_id": r.detection_id,
        "track_id": r.track_id,
        "cost": None if r.cost is None else fmt(r.cost),
        "matched": r.matched,
        "bbox": fmt_list(r.bbox),
        "shot_mode": r.shot_mode,
    }


def write_track_output(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(_dumps(track_record_to_row(r)) + "\n")


def read_track_output(path) -> List[dict]:
    rows = []
    for lineno, row in _read_rows(path):
        for k in ("frame", "detection_id", "track_id", "bbox"):
            if k not in row:
                raise InputError(f"{path}:{lineno}: missing key {k!r}")
        rows.append(row)
    return rows


# config and reports --------------------------------------------------------------

def config_to_dict(cfg: BetaConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool) or isinstance(v, (int, str)):
            out[f.name] = v
        elif isinstance(v, float):
            out[f.name] = fmt(v)
        else:
            out[f.name] = list(v)
    return out


def config_from_dict(d: dict) -> BetaConfig:
    known = {f.name for f in fields(BetaConfig)}
    unknown = set(d) - known
    if unknown:
        raise InputError(f"unknown config keys {sorted(unknown)}")
    return BetaConfig(**d)


def write_config(path, cfg: BetaConfig) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")


def read_config(path) -> BetaConfig:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e.msg})") from None
    if not isinstance(d, dict):
        raise InputError(f"{path}: config must be a JSON object")
    try:
        return config_from_dict(d)
    except TypeError as e:
        raise InputError(f"{path}: {e}") from None


def _rounded(obj):
    if isinstance(obj, float):
        return fmt(obj) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def write_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(_rounded(report), indent=2, sort_keys=True) + "\n")
