"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "sans-serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "tracklet3d",
}

INLIER_COLOR = "#1b7837"
OUTLIER_COLOR = "#b2182b"

CUE_LABELS = {
    "appearance": "appearance distance",
    "pose": "pose distance",
    "xy": "2D distance / interval",
    "nearness": "nearness distance / interval",
}


def _save(fig, path):
    # strip the version stamp so reruns produce identical files
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def plot_distance_distributions(dists, path, bins: int = 40):
    """Inlier vs outlier densities for each cue, in a 2x2 grid."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(7.0, 5.0))
        for ax, cue in zip(axes.ravel(), ("appearance", "pose", "xy", "nearness")):
            inl = dists.cue(cue, True)
            out = dists.cue(cue, False)
            both = np.concatenate([inl, out])
            if both.size == 0:
                ax.set_title(CUE_LABELS[cue] + " (no data)")
                continue
            hi = np.percentile(both, 99) if both.size > 10 else both.max()
            edges = np.linspace(0.0, max(hi, 1e-9), bins + 1)
            if inl.size:
                ax.hist(np.clip(inl, 0, hi), edges, density=True, histtype="step",
                        color=INLIER_COLOR, label=f"inliers (n={inl.size})")
            if out.size:
                ax.hist(np.clip(out, 0, hi), edges, density=True, histtype="step",
                        color=OUTLIER_COLOR, label=f"outliers (n={out.size})")
            ax.set_xlabel(CUE_LABELS[cue])
            ax.set_ylabel("density")
            ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_identity_timeline(matchings, path):
    """Predicted id assigned to each ground-truth identity over time; switches marked."""
    series = defaultdict(list)
    switches = []
    last = {}
    for fm in matchings:
        for gid, pid in fm.matches:
            series[gid].append((fm.frame, pid))
            if gid in last and last[gid] != pid:
                switches.append((fm.frame, gid))
            last[gid] = pid
    gids = sorted(series)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.0, 0.4 * max(len(gids), 3) + 1.2))
        cmap = plt.get_cmap("tab20")
        for row, gid in enumerate(gids):
            frames = np.array([f for f, _ in series[gid]])
            pids = np.array([p for _, p in series[gid]])
            ax.scatter(frames, np.full(len(frames), row), c=[cmap(p % 20) for p in pids], s=6, marker="s",
                       linewidths=0)
        if switches:
            row_of = {g: i for i, g in enumerate(gids)}
            ax.scatter([f for f, _ in switches], [row_of[g] for _, g in switches], marker="x", c="k",
                       s=30, label=f"id switch ({len(switches)})")
            ax.legend(frameon=False, loc="upper right")
        ax.set_yticks(range(len(gids)))
        ax.set_yticklabels([str(g) for g in gids])
        ax.set_ylabel("ground-truth id")
        ax.set_xlabel("frame")
        ax.set_title("predicted identity per ground-truth track (color = predicted id)")
        fig.tight_layout()
        _save(fig, path)


def plot_ablation(rows, path):
    """Bar chart of mean id switches per cost variant."""
    names = [r["variant"] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        ax.bar(names, [r["id_switches"] for r in rows], color="#4d4d4d")
        ax.set_ylabel("mean id switches")
        fig.tight_layout()
        _save(fig, path)
