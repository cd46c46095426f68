import math

import numpy as np
import pytest

from tracklet3d.state import (
    AppearanceMap,
    BetaConfig,
    InputError,
    Location3D,
    age_and_reap,
    spawn_tracklet,
    touch_tracklet,
)

from conftest import make_detection


def test_spawn_initial_state():
    t = spawn_tracklet(make_detection(0), 0)
    assert (t.track_id, t.age, len(t.location_history), len(t.pose_history)) == (0, 0, 1, 1)
    np.testing.assert_array_equal(t.appearance_state, np.zeros(6))


def test_spawn_with_embedding_keeps_embedding_form():
    t = spawn_tracklet(make_detection(0, app=np.arange(6.0)), 3)
    assert not t.uses_map
    np.testing.assert_array_equal(t.appearance_state, np.arange(6.0))


def test_spawn_with_map_keeps_map_form():
    m = AppearanceMap(np.full((3, 8, 8), 0.5), np.ones((1, 8, 8)))
    t = spawn_tracklet(make_detection(0, appearance_map=m), 0)
    assert t.uses_map
    # the aggregate must not alias the detection's map
    t.appearance_state.texture[:] = 0
    assert m.texture[0, 0, 0] == 0.5


def test_touch_resets_age_and_appends():
    t = spawn_tracklet(make_detection(0), 0)
    t.age = 3
    touch_tracklet(t, make_detection(4))
    assert t.age == 0
    assert [f for f, _ in t.location_history] == [0, 4]


def test_touch_history_is_bounded_by_window():
    cfg = BetaConfig(w=20)
    t = spawn_tracklet(make_detection(0), 0, cfg)
    for f in range(1, 25):
        touch_tracklet(t, make_detection(f), cfg)
    assert len(t.location_history) == 20
    assert t.location_history[0][0] == 5


@pytest.mark.parametrize("frame", [0, -0])
def test_touch_rejects_out_of_order(frame):
    t = spawn_tracklet(make_detection(0), 0)
    with pytest.raises(InputError):
        touch_tracklet(t, make_detection(frame))


def test_age_and_reap_boundary():
    tracks = [spawn_tracklet(make_detection(0), i) for i in range(2)]
    tracks[0].age = 23
    alive, killed = age_and_reap(tracks, t_max=24)
    assert [t.track_id for t in killed] == [0]
    assert [t.track_id for t in alive] == [1] and alive[0].age == 1
    assert not killed[0].alive


def test_age_and_reap_empty():
    assert age_and_reap([], 5) == ([], [])


def test_location_nearness_consistency():
    loc = Location3D.from_depth(1.0, 2.0, math.e)
    assert loc.n == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(InputError):
        Location3D(0.0, 0.0, 0.3, 2.0)
    with pytest.raises(InputError):
        Location3D.from_depth(0.0, 0.0, 0.0)


def test_detection_validation():
    with pytest.raises(InputError):
        make_detection(0, app=None, appearance_map=None)
    with pytest.raises(InputError):
        from tracklet3d.state import Detection

        Detection(0, (0, 0, 0, 10), np.zeros(2), Location3D.from_depth(0, 0, 1), "a",
                  appearance_embedding=np.zeros(2))


@pytest.mark.parametrize("kw", [
    {"beta_a": 0.0}, {"beta_th": -1.0}, {"alpha_0": 0.0}, {"alpha_0": 1.5}, {"w": 1},
    {"confidence": 1.0}, {"t_max": 0}, {"c": 0}, {"pose_backend": "transformer"}, {"cues": ("smell",)},
])
def test_config_validation(kw):
    with pytest.raises(InputError):
        BetaConfig(**kw)


def test_config_beta_roundtrip():
    cfg = BetaConfig().with_betas([1, 2, 3, 4, 5])
    np.testing.assert_array_equal(cfg.betas, [1, 2, 3, 4, 5])
    assert cfg.without("pose").cues == ("appearance", "xy", "nearness")
