"""Frame, event and boundary scores for detected action segments.

Boundary scores (SL/EL) use this package's own definition: for each
ground-truth action the same-class prediction with the largest IoU is
taken, and the start (end) contributes ``max(0, 1 - |offset| / length)``.
They are not comparable to numbers produced by other protocols.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError
from .streams import BACKGROUND


@dataclass
class FrameScores:
    per_class_f1: dict
    overall_f1: float
    confusion: np.ndarray
    labels: np.ndarray


@dataclass
class EventScores:
    f1_at_delta: float
    precision: float
    recall: float
    matches: list
    delta: float


@dataclass
class BoundaryScores:
    sl: float
    el: float


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def frame_fscore(pred, gt, include_background=False, background=BACKGROUND):
    """Per-class F1 and pooled F1 over frame labels.

    The pooled score counts true/false positives and false negatives over
    all action classes; background frames join the pool only when
    ``include_background`` is set.  With nothing to detect and nothing
    predicted the pooled score is 1.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise InputError(f"label sequences differ in length: {pred.shape} vs {gt.shape}")
    labels = np.union1d(pred, gt)
    index = {int(c): i for i, c in enumerate(labels)}
    confusion = np.zeros((labels.size, labels.size), dtype=np.int64)
    np.add.at(confusion, ([index[int(v)] for v in gt], [index[int(v)] for v in pred]), 1)
    tp = np.diag(confusion)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    per_class = {int(c): _f1(tp[i], fp[i], fn[i]) for i, c in enumerate(labels)}
    pooled = np.array([include_background or int(c) != background for c in labels], dtype=bool)
    TP, FP, FN = tp[pooled].sum(), fp[pooled].sum(), fn[pooled].sum()
    overall = 1.0 if TP + FP + FN == 0 else _f1(TP, FP, FN)
    return FrameScores(per_class, float(overall), confusion, labels)


def _seg_fields(seg):
    if hasattr(seg, "class_id"):
        return int(seg.start), int(seg.end), int(seg.class_id)
    s, e, c = seg[:3]
    return int(s), int(e), int(c)


def event_fscore(pred_segments, gt_anchors, delta_ms, fps, background=BACKGROUND):
    """F1 of action anchors matched within ``delta_ms``.

    A predicted action segment is anchored at its start frame.  Ground-truth
    anchors are ``(frame, class_id)`` pairs.  Matching is one-to-one per
    class, greedy in time order, each prediction taking the earliest
    unmatched anchor within tolerance; on a line this maximizes the number
    of matches, so the score never decreases as ``delta_ms`` grows.
    """
    if not fps > 0:
        raise InputError("fps must be positive")
    tol = delta_ms * fps / 1000.0
    preds = sorted((s, c) for s, _, c in map(_seg_fields, pred_segments) if c != background)
    gts = sorted((int(f), int(c)) for f, c in gt_anchors if int(c) != background)
    matches = []
    for cls in sorted({c for _, c in preds} | {c for _, c in gts}):
        p = [f for f, c in preds if c == cls]
        g = [f for f, c in gts if c == cls]
        j = 0
        for f in p:
            while j < len(g) and g[j] < f - tol:
                j += 1
            if j < len(g) and abs(g[j] - f) <= tol:
                matches.append(((f, cls), (g[j], cls)))
                j += 1
    n_match = len(matches)
    precision = n_match / len(preds) if preds else 0.0
    recall = n_match / len(gts) if gts else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    if not preds and not gts:
        precision = recall = f1 = 1.0
    return EventScores(f1, precision, recall, sorted(matches), float(delta_ms))


def gt_anchors(gt):
    """Start frames of the annotated action segments."""
    return [(s.start, s.class_id) for s in gt.segments if s.class_id != BACKGROUND]


def boundary_scores(pred_segments, gt_segments, background=BACKGROUND):
    """Mean start (SL) and end (EL) localization accuracy over ground-truth actions."""
    preds = [_seg_fields(s) for s in pred_segments]
    actions = [g for g in map(_seg_fields, gt_segments) if g[2] != background]
    if not actions:
        return BoundaryScores(0.0, 0.0)
    sl = el = 0.0
    for gs, ge, gc in actions:
        best, best_iou = None, 0.0
        for ps, pe, pc in preds:
            if pc != gc:
                continue
            inter = min(ge, pe) - max(gs, ps) + 1
            if inter <= 0:
                continue
            iou = inter / (max(ge, pe) - min(gs, ps) + 1)
            if iou > best_iou:
                best, best_iou = (ps, pe), iou
        if best is None:
            continue
        length = ge - gs + 1
        sl += max(0.0, 1.0 - abs(best[0] - gs) / length)
        el += max(0.0, 1.0 - abs(best[1] - ge) / length)
    return BoundaryScores(sl / len(actions), el / len(actions))
