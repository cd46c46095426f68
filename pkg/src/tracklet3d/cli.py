"""Command-line entry point.

Exit status: 0 on success, 1 on bad input (missing files, malformed rows,
invalid config), 2 when an internal invariant is violated.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io, metrics, simulator, tuning
from .state import BetaConfig, InputError
from .tracker import TrackerSession, run

logger = logging.getLogger("tracklet3d")


class InvariantError(RuntimeError):
    pass


def _load_config(path):
    return io.read_config(path) if path else BetaConfig()


def _figure_path(args, out: Path) -> Path | None:
    if args.no_figure:
        return None
    return Path(args.figure) if args.figure else out.with_suffix(".png")


def cmd_simulate(args):
    kwargs = {}
    if args.noise_free:
        kwargs["noise"] = simulator.NoiseModel()
    if args.k is not None:
        kwargs["k"] = args.k
    if args.gap is not None:
        kwargs["gap"] = args.gap
    try:
        scenario = simulator.make_preset(args.preset, args.seed, **kwargs)
    except TypeError as e:
        raise InputError(f"preset {args.preset!r}: {e}") from None
    frames, gt, shots = simulator.render_detections(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_detections(out / "detections.jsonl", frames)
    io.write_ground_truth(out / "gt.jsonl", gt)
    io.write_shots(out / "shots.txt", shots)
    (out / "scenario.json").write_text(json.dumps(scenario.describe(), indent=2, sort_keys=True) + "\n")
    logger.info("wrote %d detections over %d frames to %s",
                sum(len(d) for _, d in frames), len(frames), out)


def cmd_track(args):
    cfg = _load_config(args.config)
    shots = set(io.read_shots(args.shots)) if args.shots else set()
    session = TrackerSession(cfg, shots)
    output = run(session, io.iter_detection_frames(args.detections))
    seen = [r.detection_id for r in output.records]
    if len(seen) != len(set(seen)):
        raise InvariantError("a detection was labeled more than once")
    io.write_track_output(args.out, output.records)
    if args.diagnostics:
        rows = [vars(d) for d in output.diagnostics]
        io.write_report(args.diagnostics, {"frames": rows, "tracklets": output.tracklets})
    logger.info("labeled %d detections with %d tracks", len(output.records), session.next_id)


def _gt_and_pred(gt_path, pred_path):
    gt_rows = io.read_ground_truth(gt_path)
    pred_rows = io.read_track_output(pred_path)
    return (metrics.boxes_from_rows(gt_rows, "gt_id", skip_negative=True),
            metrics.boxes_from_rows(pred_rows, "track_id"))


def cmd_evaluate(args):
    gt, pred = _gt_and_pred(args.gt, args.pred)
    report = metrics.evaluate(gt, pred)
    io.write_report(args.report, report)
    fig = _figure_path(args, Path(args.report))
    if fig is not None:
        from .figures import plot_identity_timeline

        plot_identity_timeline(metrics.match_frames(gt, pred), fig)
    logger.info("MOTA %.4f IDF1 %.4f IDs %d", report["mota"], report["idf1"], report["id_switches"])


def _labeled(args, cfg):
    frames = io.parse_detections(args.detections)
    gt_ids = io.gt_identity_map(io.read_ground_truth(args.gt))
    shots = io.read_shots(args.shots) if args.shots else []
    return tuning.build_labeled_frames(frames, gt_ids, cfg, shots)


def cmd_tune(args):
    base = _load_config(args.config)
    labeled = _labeled(args, base)
    init = tuning.init_betas(tuning.distances_from_frames(labeled), base)
    best = tuning.optimize_betas(init, labeled, max_iter=args.max_iter)
    io.write_config(args.out, best)
    logger.info("association error %.4f -> %.4f", tuning.association_error(init, labeled),
                tuning.association_error(best, labeled))


def cmd_distances(args):
    cfg = _load_config(args.config)
    dists = tuning.distances_from_frames(_labeled(args, cfg))
    out = {}
    for cue in ("appearance", "pose", "xy", "nearness"):
        out[cue] = {"inlier": dists.cue(cue, True).tolist(), "outlier": dists.cue(cue, False).tolist()}
    io.write_report(args.out, out)
    fig = _figure_path(args, Path(args.out))
    if fig is not None:
        from .figures import plot_distance_distributions

        plot_distance_distributions(dists, fig)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tracklet3d", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render a synthetic scenario to files")
    s.add_argument("--preset", required=True, help=f"one of {sorted(simulator.PRESETS)} (crowdK also accepted)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--noise-free", action="store_true", help="disable all detector noise, misses and clutter")
    s.add_argument("--k", type=int, help="number of agents (crowd)")
    s.add_argument("--gap", type=int, help="occlusion length in frames (occlusion)")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("track", help="run the online tracker over a detection file")
    t.add_argument("--detections", required=True)
    t.add_argument("--config")
    t.add_argument("--shots", help="file with one shot-boundary frame index per line")
    t.add_argument("--out", required=True)
    t.add_argument("--diagnostics", help="optional per-frame diagnostics report")
    t.set_defaults(func=cmd_track)

    u = sub.add_parser("tune", help="fit the association parameters on labeled detections")
    u.add_argument("--detections", required=True)
    u.add_argument("--gt", required=True)
    u.add_argument("--out", required=True)
    u.add_argument("--config", help="base config (non-beta settings are kept)")
    u.add_argument("--shots")
    u.add_argument("--max-iter", type=int, default=500)
    u.set_defaults(func=cmd_tune)

    e = sub.add_parser("evaluate", help="score track output against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--figure", help="timeline figure path (default: report path with .png)")
    e.add_argument("--no-figure", action="store_true")
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("distances", help="harvest inlier/outlier distance samples")
    d.add_argument("--detections", required=True)
    d.add_argument("--gt", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--config")
    d.add_argument("--shots")
    d.add_argument("--figure", help="histogram figure path (default: output path with .png)")
    d.add_argument("--no-figure", action="store_true")
    d.set_defaults(func=cmd_distances)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InputError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (InvariantError, AssertionError) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
