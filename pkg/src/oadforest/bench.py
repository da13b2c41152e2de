"""Per-frame latency measurement and tree-count sweeps."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .detector import DetectorState, predict_frame, step
from .features import extract_frame_feature
from .tree import Comparisons


@dataclass
class LatencyStats:
    mean_ms: float
    median_ms: float
    p99_ms: float
    n_frames: int
    max_comparisons: int
    comparison_bound: int


@dataclass
class SweepRow:
    n_trees: int
    accuracy: float
    mean_ms: float


def _frame_times(model, stream, n_measurements):
    forest, lag, beta = model.forest_, model.deriv_lag, model.beta_
    times = np.empty(n_measurements)
    clock = time.perf_counter_ns
    i = 0
    while i < n_measurements:
        state = DetectorState(beta, model.classes_)
        for t in range(stream.n_frames):
            if i == n_measurements:
                break
            start = clock()
            x = extract_frame_feature(stream, t, lag).values
            step(state, t, predict_frame(forest, x))
            times[i] = clock() - start
            i += 1
    return times / 1e6


def max_comparisons(model, stream):
    """Largest number of split tests any frame of ``stream`` needs."""
    forest, lag = model.forest_, model.deriv_lag
    worst = 0
    for t in range(stream.n_frames):
        counter = Comparisons()
        forest.frame_stats(extract_frame_feature(stream, t, lag).values, counter)
        worst = max(worst, counter.count)
    return worst


def benchmark_latency(model, stream, repetitions=1000):
    """Wall time of feature extraction + forest averaging + detector step per frame.

    ``repetitions`` frame measurements are taken, cycling over ``stream``
    with a fresh detector state on every pass; BLAS threads are pinned to
    one.
    """
    with threadpool_limits(limits=1):
        _frame_times(model, stream, min(50, repetitions))  # warm-up
        times = _frame_times(model, stream, repetitions)
    forest = model.forest_
    bound = len(forest.estimators_) * forest.max_depth
    return LatencyStats(float(times.mean()), float(np.median(times)),
                        float(np.percentile(times, 99)), int(times.size),
                        max_comparisons(model, stream), int(bound))


def sweep_trees(model, tree_counts, eval_streams, timing_stream, repetitions=1000):
    """Accuracy and per-frame time of the first ``k`` trees for each ``k``.

    Trees are grown from independent seeds, so the first ``k`` trees of a
    large forest are exactly the forest a ``k``-tree run would have grown.
    ``eval_streams`` is a list of ``(stream, ground_truth)`` pairs; accuracy
    is the per-frame argmax accuracy of the forest alone.
    """
    from sklearn.base import clone

    rows = []
    full = model.forest_
    for k in tree_counts:
        k = int(k)
        if not 1 <= k <= len(full.estimators_):
            raise ValueError(f"tree count {k} outside 1..{len(full.estimators_)}")
        sub = clone(model)
        sub.forest_ = full.truncated(k)
        sub.n_joints_ = model.n_joints_
        sub.classes_ = model.classes_
        sub.beta_ = model.beta_
        correct = total = 0
        for stream, gt in eval_streams:
            dists, _ = sub.frame_predictions(stream)
            pred = sub.classes_[np.argmax(dists, axis=1)]
            correct += int(np.sum(pred == gt.labels()))
            total += gt.n_frames
        stats = benchmark_latency(sub, timing_stream, repetitions)
        rows.append(SweepRow(k, correct / total, stats.mean_ms))
    return rows
