import math

import numpy as np
import pytest

from tracklet3d import experiments, simulator, tuning
from tracklet3d.association import PairDistances
from tracklet3d.state import BetaConfig, InputError


def distances(app, pose, xy, n, inlier=None, interval_xy=1.0, interval_n=1.0):
    k = len(app)
    inlier = np.ones(k, dtype=bool) if inlier is None else np.asarray(inlier)
    raw = {"appearance": np.asarray(app, float), "pose": np.asarray(pose, float),
           "xy": np.asarray(xy, float) * interval_xy, "interval_xy": np.full(k, interval_xy),
           "nearness": np.asarray(n, float) * interval_n, "interval_n": np.full(k, interval_n)}
    return tuning.LabeledDistances(raw["appearance"], raw["pose"], np.asarray(xy, float),
                                   np.asarray(n, float), inlier, raw)


def test_init_median_and_mean_rules():
    rng = np.random.default_rng(0)
    k = 10_000
    d = distances(np.full(k, 2.0), np.full(k, 0.5), rng.exponential(3.0, k), rng.exponential(0.2, k))
    cfg = tuning.init_betas(d)
    assert cfg.beta_a == 0.5 and cfg.beta_p == 2.0
    assert cfg.beta_xy == pytest.approx(3.0, rel=0.05)
    assert cfg.beta_n == pytest.approx(0.2, rel=0.05)


def test_init_threshold_is_inlier_quantile():
    rng = np.random.default_rng(1)
    k = 1000
    d = distances(rng.random(k), rng.random(k), rng.exponential(1, k), rng.exponential(1, k))
    cfg = tuning.init_betas(d)
    costs = tuning.inlier_costs(d, cfg)
    assert np.mean(costs <= cfg.beta_th) == pytest.approx(0.99, abs=0.002)


def test_init_all_zero_clamps():
    d = distances(np.zeros(200), np.zeros(200), np.zeros(200), np.zeros(200))
    cfg = tuning.init_betas(d)
    assert cfg.beta_a == tuning.BETA_MIN and cfg.beta_xy == tuning.BETA_MIN


def test_init_needs_samples():
    with pytest.raises(InputError):
        tuning.init_betas(distances(np.ones(10), np.ones(10), np.ones(10), np.ones(10)))


def labeled_frame(costs_match, truth_tracks, truth_dets):
    """A labeled frame whose appearance distance alone sets the cost."""
    app = np.asarray(costs_match, float)
    T, D = app.shape
    z = np.zeros((T, D))
    dist = PairDistances(np.expm1(app), z, z, np.ones((T, D)), z, np.ones((T, D)), np.zeros((T, 1), bool))
    return tuning.LabeledFrame(0, dist, np.asarray(truth_tracks), np.asarray(truth_dets))


def unit_cfg():
    return BetaConfig(beta_a=1, beta_p=1, beta_xy=1, beta_n=1, beta_th=1.0)


def test_association_error_examples():
    good = labeled_frame([[0.1]], [0], [0])
    assert tuning.association_error(unit_cfg(), [good]) == 0.0
    swapped = labeled_frame([[5.0, 0.1], [0.1, 5.0]], [0, 1], [0, 1])
    assert tuning.association_error(unit_cfg(), [swapped]) == 1.0
    frames = [good] * 49 + [labeled_frame([[0.1]], [0], [3])]
    assert tuning.association_error(unit_cfg(), frames) == pytest.approx(0.02)


def test_missed_match_and_clutter_count_as_errors():
    rejected = labeled_frame([[5.0]], [0], [0])
    clutter = labeled_frame([[0.1]], [0], [-1])
    assert tuning.association_error(unit_cfg(), [rejected]) == 1.0
    assert tuning.association_error(unit_cfg(), [clutter]) == 1.0


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_rosenbrock():
    res = tuning.nelder_mead(rosenbrock, [-1.2, 1.0], max_iter=500, tol=1e-8)
    assert res.fun < 1e-6 and res.nit <= 500


def test_convex_one_cue_against_grid():
    # error-like convex loss in log beta with a known interior minimum
    def loss(x):
        return abs(x[0] - 0.7) + 0.1 * (x[0] - 0.7) ** 2

    grid = np.linspace(-3, 3, 60001)
    x_grid = grid[np.argmin([loss([g]) for g in grid])]
    res = tuning.nelder_mead(loss, [2.0])
    assert res.x[0] == pytest.approx(x_grid, abs=1e-2)


def test_nelder_mead_lower_bound_exit():
    calls = []

    def f(x):
        calls.append(1)
        return 0.0

    res = tuning.nelder_mead(f, [1.0, 2.0], lower_bound=0.0)
    assert res.converged and res.nit == 0


@pytest.fixture(scope="module")
def crowd_labeled():
    return experiments.labeled_frames_for([simulator.crowd(s) for s in (200, 201)], BetaConfig())


def test_optimize_never_worse_and_positive(crowd_labeled):
    init = BetaConfig().with_betas([1.0, 1.0, 1.0, 1.0, 0.5])
    best = tuning.optimize_betas(init, crowd_labeled, max_iter=60)
    e0 = tuning.association_error(init, crowd_labeled)
    assert tuning.association_error(best, crowd_labeled) <= e0
    assert np.all(best.betas > 0)


def test_optimize_returns_init_when_error_zero(crowd_labeled):
    cfg = tuning.init_betas(tuning.distances_from_frames(crowd_labeled), BetaConfig())
    cfg = cfg.with_betas([*cfg.betas[:4], cfg.beta_th * 3])
    assert tuning.association_error(cfg, crowd_labeled) == 0.0
    assert tuning.optimize_betas(cfg, crowd_labeled) is cfg


def test_harvest_noise_free_separates():
    s = simulator.crossing(0, noise=simulator.NoiseModel())
    # a moving pose is sinusoidal, which a linear forecast cannot hit exactly
    for a in s.agents:
        a.pose_amp = np.zeros_like(a.pose_amp)
    frames, gt, shots = simulator.render_detections(s)
    d = tuning.harvest_distances(frames, experiments.gt_ids_from_rows(gt), BetaConfig(), shots)
    for cue in ("appearance", "pose"):
        assert np.all(d.cue(cue, True) < 1e-9) and np.all(d.cue(cue, False) > 0)
    # from the second observation on, the forecast is an exact line
    labeled = tuning.build_labeled_frames(frames, experiments.gt_ids_from_rows(gt), BetaConfig(), shots)
    d2 = tuning.distances_from_frames([f for f in labeled if f.frame >= 2])
    assert np.all(d2.raw["xy"][d2.inlier] < 1e-6)


def test_harvest_moving_pose_still_separates():
    s = simulator.crossing(0, noise=simulator.NoiseModel())
    frames, gt, shots = simulator.render_detections(s)
    d = tuning.harvest_distances(frames, experiments.gt_ids_from_rows(gt), BetaConfig(), shots)
    assert d.cue("pose", True).max() < 0.01 * d.cue("pose", False).min()


def test_harvest_single_track_has_no_outliers():
    s = simulator.crossing(0, noise=simulator.NoiseModel())
    s.agents = s.agents[:1]
    frames, gt, shots = simulator.render_detections(s)
    d = tuning.harvest_distances(frames, experiments.gt_ids_from_rows(gt), BetaConfig(), shots)
    assert d.inlier.all() and len(d.inlier) == s.num_frames - 1


def test_harvest_xy_matches_injected_noise():
    sigma = 2.0
    noise = simulator.NoiseModel(sigma_xy=sigma)
    cfg = BetaConfig()
    labeled = []
    for seed in range(4):
        s = simulator.crossing(seed, noise=noise, num_frames=120)
        frames, gt, shots = simulator.render_detections(s)
        labeled += tuning.build_labeled_frames(frames, experiments.gt_ids_from_rows(gt), cfg, shots)
    # steady state: a full window of w points, forecasting one step past its end
    lf = [f for f in labeled if f.frame >= cfg.w]
    d = tuning.distances_from_frames(lf)
    w = cfg.w
    t = np.arange(w)
    inflation = 1 + 1 / w + (w - t.mean()) ** 2 / np.sum((t - t.mean()) ** 2)
    # forecast error per axis is N(0, sigma^2 * inflation); the 2D norm is Rayleigh
    expected = sigma * math.sqrt(inflation) * math.sqrt(math.pi / 2)
    assert np.mean(d.raw["xy"][d.inlier]) == pytest.approx(expected, rel=0.10)
