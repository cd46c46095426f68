import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracklet3d.location import (
    RegressionFit,
    fit_line,
    forecast_location,
    predict_location,
    prediction_interval,
    t_quantile,
)
from tracklet3d.state import BetaConfig, InputError, spawn_tracklet, touch_tracklet

from conftest import make_detection


def normal_equations(t, v):
    """Independent oracle: solve [[n, St], [St, Stt]] [b, m] = [Sv, Stv]."""
    t, v = np.asarray(t, float), np.asarray(v, float)
    A = np.array([[len(t), t.sum()], [t.sum(), (t * t).sum()]])
    b, m = np.linalg.solve(A, [v.sum(), (t * v).sum()])
    return m, b


def test_exact_line():
    f = fit_line([(0, 0), (1, 1), (2, 2), (3, 3)], 20)
    assert (f.slope, f.intercept, f.mse) == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)


def test_constant_series():
    f = fit_line([(0, 5), (1, 5), (2, 5)], 20)
    assert (f.slope, f.intercept) == pytest.approx((0.0, 5.0), abs=1e-12)


def test_hand_example():
    pts = [(0, 0), (1, 2), (2, 1), (3, 3)]
    m, b = normal_equations(*zip(*pts))
    f = fit_line(pts, 20)
    assert f.slope == pytest.approx(m, abs=1e-12) and f.intercept == pytest.approx(b, abs=1e-12)
    # hand values: slope 4/5, intercept 0.3, SSE 1.8 over 2 dof
    assert (f.slope, f.intercept, f.mse) == pytest.approx((0.8, 0.3, 0.9), abs=1e-12)


def test_window_keeps_last_points():
    pts = [(t, 100.0) for t in range(5)] + [(t, 2.0 * t) for t in range(5, 10)]
    f = fit_line(pts, 5)
    assert f.w_used == 5 and f.slope == pytest.approx(2.0) and f.mse == pytest.approx(0.0, abs=1e-12)


def test_two_points_have_zero_mse():
    f = fit_line([(0, 0.0), (2, 3.0)], 20)
    assert f.mse == 0.0 and f.slope == pytest.approx(1.5)
    assert prediction_interval(f, 3, floor=5.0) == 5.0


def test_degenerate_single_point():
    f = fit_line([(4, 7.0)], 20)
    assert f.degenerate and f(100) == 7.0
    assert prediction_interval(f, 9, floor=0.1) == 0.1


def test_empty_raises():
    with pytest.raises(InputError):
        fit_line([], 5)


def test_interval_example():
    fit = RegressionFit(slope=0.0, intercept=0.0, mse=1.0, t_mean=2.0, sxx=10.0, w_used=5)
    tabulated = 3.1824  # t_{0.975, 3} from a printed table
    expected = tabulated * np.sqrt(2.1)
    assert prediction_interval(fit, 5) == pytest.approx(expected, rel=1e-4)
    assert t_quantile(0.95, 3) == pytest.approx(tabulated, abs=1e-4)


def test_interval_zero_mse_is_not_floored():
    fit = fit_line([(0, 0), (1, 1), (2, 2), (3, 3)], 20)
    assert prediction_interval(fit, 4, floor=5.0) == 0.0


def test_interval_minimal_at_mean():
    fit = RegressionFit(0.0, 0.0, 1.0, 2.0, 10.0, 5)
    widths = [prediction_interval(fit, t) for t in np.linspace(2, 12, 21)]
    assert np.all(np.diff(widths) >= 0)
    assert prediction_interval(fit, 2.0) == min(widths)
    assert prediction_interval(fit, 0.0) == pytest.approx(prediction_interval(fit, 4.0))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=25), st.floats(-1e3, 1e3))
def test_translation_equivariance(values, k):
    pts = [(t, v) for t, v in enumerate(values)]
    f1 = fit_line(pts, 20)
    f2 = fit_line([(t, v + k) for t, v in pts], 20)
    tgt = len(values)
    assert f2(tgt) == pytest.approx(f1(tgt) + k, abs=1e-6)
    assert prediction_interval(f2, tgt) == pytest.approx(prediction_interval(f1, tgt), rel=1e-6, abs=1e-6)


def track_with(history, cfg=None):
    cfg = cfg or BetaConfig()
    (f0, x0), *rest = history
    t = spawn_tracklet(make_detection(f0, x=x0), 0, cfg)
    for f, x in rest:
        touch_tracklet(t, make_detection(f, x=x), cfg)
    return t


def test_predict_exact_extrapolation():
    t = track_with([(f, float(f)) for f in range(5)])
    assert predict_location(t, 5, BetaConfig())[0] == pytest.approx(5.0)


def test_predict_single_observation():
    t = track_with([(3, 7.0)])
    pred, deltas = forecast_location(t, 40, BetaConfig())
    assert pred[0] == 7.0
    np.testing.assert_array_equal(deltas, [5.0, 5.0, 0.1])


def test_predict_with_gap():
    t = track_with([(0, 0.0), (1, 2.0), (3, 6.0), (4, 8.0)])
    assert predict_location(t, 6, BetaConfig())[0] == pytest.approx(12.0)


def test_predict_rejects_past_target():
    t = track_with([(0, 0.0), (1, 1.0)])
    with pytest.raises(InputError):
        forecast_location(t, 1, BetaConfig())
