"""Appearance aggregation over a tracklet and the deterministic appearance encoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import AppearanceMap, InputError, Tracklet

VISIBILITY_THRESHOLD = 0.5


def aggregate(prev: AppearanceMap, obs: AppearanceMap, alpha_0: float) -> AppearanceMap:
    """Blend a new single-frame map into the tracklet aggregate.

    Visibility is binarized per pixel at ``VISIBILITY_THRESHOLD`` to select the
    blend rate: ``alpha_0`` where both are visible, 1 where only the observation
    is, 0 otherwise. Output visibility is the per-pixel maximum.
    """
    if prev.texture.shape != obs.texture.shape:
        raise InputError(f"appearance map size mismatch: {prev.texture.shape} vs {obs.texture.shape}")
    if not 0 < alpha_0 <= 1:
        raise InputError(f"alpha_0 must lie in (0, 1], got {alpha_0}")
    prev_vis = prev.visibility >= VISIBILITY_THRESHOLD
    obs_vis = obs.visibility >= VISIBILITY_THRESHOLD
    alpha = np.where(obs_vis, np.where(prev_vis, alpha_0, 1.0), 0.0)
    texture = (1.0 - alpha) * prev.texture + alpha * obs.texture
    # alpha == 0 must leave prev bitwise untouched
    texture = np.where(alpha == 0.0, prev.texture, texture)
    return AppearanceMap(texture, np.maximum(prev.visibility, obs.visibility))


def aggregate_embedding(prev, prev_visible: bool, obs, obs_visible: bool, alpha_0: float):
    """Whole-vector version of :func:`aggregate` with a scalar visibility flag."""
    prev = np.asarray(prev, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if prev.shape != obs.shape:
        raise InputError(f"appearance embedding size mismatch: {prev.shape} vs {obs.shape}")
    if not obs_visible:
        return prev, prev_visible
    if not prev_visible:
        return obs.copy(), True
    return (1.0 - alpha_0) * prev + alpha_0 * obs, True


@dataclass(frozen=True)
class AppearanceEncoder:
    mode: str = "passthrough"
    grid: int = 4

    def __post_init__(self):
        if self.mode not in ("passthrough", "downsample_flatten"):
            raise InputError(f"unknown encoder mode {self.mode!r}")
        if self.grid < 1:
            raise InputError("encoder grid must be >= 1")

    @property
    def output_dim(self) -> int:
        """Length of pooled map embeddings."""
        return 3 * self.grid * self.grid


def encode(a: AppearanceMap, enc: AppearanceEncoder) -> np.ndarray:
    """Visibility-masked area-average pool of the texture onto a ``grid x grid`` layout.

    Cells with no visibility encode as 0. Maps are always pooled, whatever
    ``enc.mode`` says; passthrough applies to precomputed embeddings only.
    """
    h, w = a.size
    g = enc.grid
    if h % g or w % g:
        raise InputError(f"map size {h}x{w} is not divisible by encoder grid {g}")
    tex = a.texture.reshape(3, g, h // g, g, w // g)
    vis = a.visibility.reshape(1, g, h // g, g, w // g)
    num = (tex * vis).sum(axis=(2, 4))
    den = vis.sum(axis=(2, 4))
    out = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return out.ravel()


def predict_appearance(t: Tracklet, enc: AppearanceEncoder) -> np.ndarray:
    """The current aggregate serves as the appearance forecast."""
    if t.uses_map:
        return encode(t.appearance_state, enc)
    return np.asarray(t.appearance_state, dtype=float).copy()


def detection_embedding(d, enc: AppearanceEncoder) -> np.ndarray:
    # maps are always pooled; passthrough only concerns precomputed embeddings
    if d.appearance_map is not None:
        return encode(d.appearance_map, enc)
    return d.appearance_embedding
