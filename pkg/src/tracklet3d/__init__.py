"""Online multi-person tracking from per-frame 3D detections.

Tracklets aggregate appearance, location and pose over time, forecast them
for the next frame, and detections are assigned by a probabilistic cost
solved with thresholded Hungarian matching.
"""

from .state import (
    AppearanceMap,
    BetaConfig,
    Detection,
    InputError,
    Location3D,
    Tracklet,
    TrackletPrediction,
)
from .tracker import TrackerSession, TrackOutput, run

__version__ = "0.1.0"

__all__ = [
    "AppearanceMap",
    "BetaConfig",
    "Detection",
    "InputError",
    "Location3D",
    "Tracklet",
    "TrackletPrediction",
    "TrackerSession",
    "TrackOutput",
    "run",
]
