"""CLEAR-style and identity metrics on labeled bounding boxes.

Both ground truth and predictions are mappings ``frame -> [(object_id, bbox)]``
with ``bbox = (x_min, y_min, width, height)``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .state import InputError

IOU_THRESHOLD = 0.5

Boxes = Dict[int, List[Tuple[int, Tuple[float, float, float, float]]]]


def iou(a, b) -> float:
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    iw = min(ax0 + aw, bx0 + bw) - max(ax0, bx0)
    ih = min(ay0 + ah, by0 + bh) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def greedy_match(gt_boxes, pred_boxes, threshold: float = IOU_THRESHOLD):
    """Greedy descending-IoU matching; returns index pairs ``(gt_idx, pred_idx)``."""
    cands = []
    for i, (_, g) in enumerate(gt_boxes):
        for j, (_, p) in enumerate(pred_boxes):
            v = iou(g, p)
            if v >= threshold:
                cands.append((-v, i, j))
    cands.sort()
    used_g, used_p, pairs = set(), set(), []
    for _, i, j in cands:
        if i in used_g or j in used_p:
            continue
        used_g.add(i)
        used_p.add(j)
        pairs.append((i, j))
    return pairs


@dataclass
class FrameMatching:
    frame: int
    matches: List[Tuple[int, int]] = field(default_factory=list)  # (gt_id, pred_id)
    fn: int = 0
    fp: int = 0
    idsw: int = 0
    num_gt: int = 0
    num_pred: int = 0


def match_frames(gt: Boxes, pred: Boxes, threshold: float = IOU_THRESHOLD, matcher=greedy_match):
    """Per-frame correspondences, misses, false positives and identity switches.

    A gt/pred correspondence from the previous matched frame is kept while
    its IoU stays at or above ``threshold``; the remaining boxes go to
    ``matcher``.
    """
    frames = sorted(set(gt) | set(pred))
    last_pred: Dict[int, int] = {}
    out = []
    for f in frames:
        g = gt.get(f, [])
        p = pred.get(f, [])
        pairs = []
        pred_index = {pid: j for j, (pid, _) in enumerate(p)}
        used_p = set()
        for i, (gid, box) in enumerate(g):
            j = pred_index.get(last_pred.get(gid))
            if j is not None and j not in used_p and iou(box, p[j][1]) >= threshold:
                pairs.append((i, j))
                used_p.add(j)
        kept_g = {i for i, _ in pairs}
        rest_g = [i for i in range(len(g)) if i not in kept_g]
        rest_p = [j for j in range(len(p)) if j not in used_p]
        sub = matcher([g[i] for i in rest_g], [p[j] for j in rest_p], threshold)
        pairs += [(rest_g[a], rest_p[b]) for a, b in sub]
        fm = FrameMatching(f, num_gt=len(g), num_pred=len(p))
        for i, j in sorted(pairs):
            gid, pid = g[i][0], p[j][0]
            fm.matches.append((gid, pid))
            if gid in last_pred and last_pred[gid] != pid:
                fm.idsw += 1
            last_pred[gid] = pid
        fm.fn = len(g) - len(pairs)
        fm.fp = len(p) - len(pairs)
        out.append(fm)
    return out


def _total_gt(gt: Boxes) -> int:
    n = sum(len(v) for v in gt.values())
    if n == 0:
        raise InputError("ground truth contains no boxes")
    return n


def mota(gt: Boxes, pred: Boxes, threshold: float = IOU_THRESHOLD, matcher=greedy_match) -> float:
    total = _total_gt(gt)
    fms = match_frames(gt, pred, threshold, matcher)
    errors = sum(m.fn + m.fp + m.idsw for m in fms)
    return 1.0 - errors / total


def id_switches(gt: Boxes, pred: Boxes, threshold: float = IOU_THRESHOLD) -> int:
    return sum(m.idsw for m in match_frames(gt, pred, threshold))


def identity_counts(gt: Boxes, pred: Boxes, threshold: float = IOU_THRESHOLD):
    """Per (gt_id, pred_id) count of frames where the two boxes overlap at ``threshold``."""
    counts: Dict[Tuple[int, int], int] = defaultdict(int)
    for f in set(gt) & set(pred):
        for gid, g in gt[f]:
            for pid, p in pred[f]:
                if iou(g, p) >= threshold:
                    counts[gid, pid] += 1
    return counts


def idf1_counts(gt: Boxes, pred: Boxes, threshold: float = IOU_THRESHOLD):
    """IDTP, IDFP, IDFN under the optimal one-to-one gt/pred identity matching."""
    counts = identity_counts(gt, pred, threshold)
    total_gt = sum(len(v) for v in gt.values())
    total_pred = sum(len(v) for v in pred.values())
    gids = sorted({g for v in gt.values() for g, _ in v})
    pids = sorted({p for v in pred.values() for p, _ in v})
    idtp = 0
    if gids and pids:
        w = np.zeros((len(gids), len(pids)))
        gi = {g: i for i, g in enumerate(gids)}
        pi = {p: j for j, p in enumerate(pids)}
        for (g, p), c in counts.items():
            w[gi[g], pi[p]] = c
        r, c = linear_sum_assignment(w, maximize=True)
        idtp = int(w[r, c].sum())
    return idtp, total_pred - idtp, total_gt - idtp


def idf1(gt: Boxes, pred: Boxes, threshold: float = IOU_THRESHOLD) -> float:
    _total_gt(gt)
    idtp, idfp, idfn = idf1_counts(gt, pred, threshold)
    return 2 * idtp / (2 * idtp + idfp + idfn)


def evaluate(gt: Boxes, pred: Boxes, threshold: float = IOU_THRESHOLD) -> dict:
    """All metrics in one report dict (HOTA is reserved and left empty)."""
    fms = match_frames(gt, pred, threshold)
    total = _total_gt(gt)
    fn = sum(m.fn for m in fms)
    fp = sum(m.fp for m in fms)
    sw = sum(m.idsw for m in fms)
    idtp, idfp, idfn = idf1_counts(gt, pred, threshold)
    return {
        "mota": 1.0 - (fn + fp + sw) / total,
        "idf1": 2 * idtp / (2 * idtp + idfp + idfn),
        "id_switches": sw,
        "num_gt": total,
        "num_pred": sum(len(v) for v in pred.values()),
        "fn": fn,
        "fp": fp,
        "idtp": idtp,
        "idfp": idfp,
        "idfn": idfn,
        "iou_threshold": threshold,
        "hota": None,
    }


def boxes_from_rows(rows, id_key: str, skip_negative: bool = False) -> Boxes:
    out: Boxes = defaultdict(list)
    for r in rows:
        oid = r[id_key]
        if skip_negative and oid < 0:
            continue
        out[int(r["frame"])].append((int(oid), tuple(r["bbox"])))
    return dict(out)
