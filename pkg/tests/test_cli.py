import json

import pytest

from tracklet3d.cli import main


def sim(tmp_path, *extra, preset="crossing", seed=7, name="sim"):
    out = tmp_path / name
    assert main(["simulate", "--preset", preset, "--seed", str(seed), "--out", str(out), *extra]) == 0
    return out


def test_simulate_is_deterministic(tmp_path):
    a = sim(tmp_path, name="a")
    b = sim(tmp_path, name="b")
    for f in ("detections.jsonl", "gt.jsonl", "shots.txt", "scenario.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_noise_free_crossing_pipeline(tmp_path):
    d = sim(tmp_path, "--noise-free")
    assert main(["track", "--detections", str(d / "detections.jsonl"), "--out", str(d / "t.jsonl")]) == 0
    assert main(["evaluate", "--pred", str(d / "t.jsonl"), "--gt", str(d / "gt.jsonl"),
                 "--report", str(d / "r.json")]) == 0
    report = json.loads((d / "r.json").read_text())
    assert report["mota"] == 1.0 and report["id_switches"] == 0
    assert (d / "r.png").stat().st_size > 0


def test_shot_file_marks_frame(tmp_path):
    d = sim(tmp_path)
    (d / "s.txt").write_text("10\n")
    assert main(["track", "--detections", str(d / "detections.jsonl"), "--shots", str(d / "s.txt"),
                 "--out", str(d / "t.jsonl"), "--diagnostics", str(d / "diag.json")]) == 0
    diag = json.loads((d / "diag.json").read_text())
    modes = {f["frame"]: f["shot_mode"] for f in diag["frames"]}
    assert modes[10] is True and not any(v for k, v in modes.items() if k != 10)
    rows = [json.loads(line) for line in (d / "t.jsonl").read_text().splitlines()]
    assert all(r["shot_mode"] == (r["frame"] == 10) for r in rows)


def test_tune_and_distances(tmp_path):
    d = sim(tmp_path, preset="crowd", seed=3)
    args = ["--detections", str(d / "detections.jsonl"), "--gt", str(d / "gt.jsonl")]
    assert main(["tune", *args, "--out", str(d / "cfg.json"), "--max-iter", "20"]) == 0
    cfg = json.loads((d / "cfg.json").read_text())
    assert all(cfg[k] > 0 for k in ("beta_a", "beta_p", "beta_xy", "beta_n", "beta_th"))
    assert main(["track", "--detections", str(d / "detections.jsonl"), "--config", str(d / "cfg.json"),
                 "--out", str(d / "t.jsonl")]) == 0
    assert main(["distances", *args, "--out", str(d / "h.json")]) == 0
    h = json.loads((d / "h.json").read_text())
    assert set(h) == {"appearance", "pose", "xy", "nearness"} and h["xy"]["inlier"]
    assert (d / "h.png").exists()


def test_missing_file_is_input_error(tmp_path, capsys):
    assert main(["track", "--detections", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "t")]) == 1
    assert "error" in capsys.readouterr().err


def test_malformed_row_is_input_error(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"frame": 0}\n')
    assert main(["track", "--detections", str(p), "--out", str(tmp_path / "t")]) == 1


def test_bad_config_is_input_error(tmp_path):
    d = sim(tmp_path)
    (d / "c.json").write_text('{"beta_q": 2}')
    assert main(["track", "--detections", str(d / "detections.jsonl"), "--config", str(d / "c.json"),
                 "--out", str(d / "t")]) == 1


@pytest.mark.parametrize("argv", [["simulate"], ["bogus"], ["track", "--detections", "x", "--out", "y", "--nope"]])
def test_bad_flags(argv):
    assert main(argv) == 1


def test_unknown_preset(tmp_path):
    assert main(["simulate", "--preset", "stadium", "--out", str(tmp_path / "s")]) == 1


def test_invariant_violation_exit_code(tmp_path, monkeypatch):
    d = sim(tmp_path)
    from tracklet3d import cli

    def broken(session, frames):
        raise AssertionError("labels out of sync")

    monkeypatch.setattr(cli, "run", broken)
    assert main(["track", "--detections", str(d / "detections.jsonl"), "--out", str(d / "t")]) == 2
