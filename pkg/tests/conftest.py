import numpy as np
import pytest

from tracklet3d.state import Detection, Location3D


def make_detection(frame, x=100.0, y=200.0, z=5.0, app=None, pose=None, det_id=None, **kw):
    return Detection(
        frame_index=frame,
        bbox=(x - 20.0, y - 50.0, 40.0, 100.0),
        pose_embedding=np.zeros(4) if pose is None else pose,
        location=Location3D.from_depth(x, y, z),
        detection_id=det_id or f"{frame}:{x:.0f}",
        appearance_embedding=np.zeros(6) if app is None and "appearance_map" not in kw else app,
        **kw,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
