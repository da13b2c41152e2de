"""Online per-frame detection on top of a trained context forest.

Each frame is classified by averaging leaf distributions over trees.  A
change of the per-frame argmax is accepted only when the averaged leaf
location says the frame sits near a segment boundary (``loc < beta`` or
``loc > 1 - beta``); segments are relabeled on close by the argmax of
their aggregated distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from .exceptions import InputError
from .features import feature_dim, stream_features, stream_temporal_contexts
from .forest import ContextForestClassifier
from .streams import BACKGROUND

BETA_MAX = 0.5


@dataclass(frozen=True)
class FramePrediction:
    class_dist: np.ndarray
    mean_loc: float
    argmax_class: int


@dataclass(frozen=True)
class DetectedSegment:
    start: int
    end: int
    class_id: int
    score: float


@dataclass
class DetectorState:
    beta: float
    classes: np.ndarray
    current_class: int = BACKGROUND
    segment_start: int = 0
    aggregate_dist: np.ndarray = None
    n_aggregated: int = 0
    emitted: list = field(default_factory=list)
    segments: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.beta <= BETA_MAX:
            raise InputError(f"beta must lie in [0, 0.5], got {self.beta}")
        self.classes = np.asarray(self.classes)
        if self.aggregate_dist is None:
            self.aggregate_dist = np.zeros(self.classes.size)


def predict_frame(forest, x, counter=None):
    dist, loc = forest.frame_stats(x, counter)
    return FramePrediction(dist, loc, int(forest.classes_[int(np.argmax(dist))]))


def gate_open(beta, loc):
    # beta = 0.5 opens the gate everywhere, including loc == 0.5 exactly
    return beta >= BETA_MAX or loc < beta or loc > 1.0 - beta


def _close(state, end):
    k = int(np.argmax(state.aggregate_dist))
    seg = DetectedSegment(state.segment_start, end, int(state.classes[k]),
                          float(state.aggregate_dist[k] / state.n_aggregated))
    state.segments.append(seg)
    return seg


def step(state, t, pred):
    """Advance ``state`` by frame ``t``; returns ``(causal_label, closed_segment_or_None)``."""
    closed = None
    if pred.argmax_class != state.current_class and gate_open(state.beta, pred.mean_loc):
        if state.n_aggregated:
            closed = _close(state, t - 1)
            state.aggregate_dist = np.zeros_like(state.aggregate_dist)
            state.n_aggregated = 0
        state.current_class = pred.argmax_class
        state.segment_start = t
    state.aggregate_dist = state.aggregate_dist + pred.class_dist
    state.n_aggregated += 1
    state.emitted.append(state.current_class)
    return state.current_class, closed


def finalize(state, last_t):
    """Close the open segment at ``last_t`` with its refined label."""
    assert state.n_aggregated > 0, "no frames aggregated in the open segment"
    return _close(state, last_t)


def causal_labels(argmax, locs, beta, initial=BACKGROUND):
    """Label stream emitted by :func:`step` without tracking aggregates."""
    out = np.empty(len(argmax), dtype=np.int64)
    current = initial
    open_all = beta >= BETA_MAX
    hi = 1.0 - beta
    for t, (a, loc) in enumerate(zip(argmax.tolist(), locs.tolist())):
        if a != current and (open_all or loc < beta or loc > hi):
            current = a
        out[t] = current
    return out


def run_detector(dists, locs, classes, beta):
    """Replay per-frame forest outputs through the detector.

    Returns ``(causal_labels, segments)``.
    """
    state = DetectorState(beta, classes)
    classes = np.asarray(classes)
    argmax = classes[np.argmax(dists, axis=1)]
    for t in range(len(locs)):
        step(state, t, FramePrediction(dists[t], float(locs[t]), int(argmax[t])))
    finalize(state, len(locs) - 1)
    return np.array(state.emitted, dtype=np.int64), state.segments


def beta_grid(step_size=0.01):
    n = int(round(BETA_MAX / step_size))
    return np.round(np.arange(n + 1) * step_size, 10)


def select_beta(predictions, truths, classes, grid=None):
    """Grid search for the beta minimizing pooled frame error (ties -> smallest beta).

    ``predictions`` is a list of ``(dists, locs)`` pairs, ``truths`` the
    matching per-frame label arrays.
    """
    if not predictions:
        raise InputError("beta calibration needs labeled data")
    grid = beta_grid() if grid is None else grid
    classes = np.asarray(classes)
    argmaxes = [classes[np.argmax(d, axis=1)] for d, _ in predictions]
    total = sum(len(y) for y in truths)
    best_beta, best_err = None, np.inf
    errors = []
    for beta in grid:
        wrong = sum(int(np.sum(causal_labels(a, l, beta) != y))
                    for a, (_, l), y in zip(argmaxes, predictions, truths))
        err = wrong / total
        errors.append(err)
        if err < best_err:
            best_beta, best_err = float(beta), err
    return best_beta, np.array(errors)


class OnlineFeatureBuffer:
    """Keeps the last ``2*lag + 1`` frames to compute causal features online."""

    def __init__(self, n_joints, lag=1):
        self.n_joints = n_joints
        self.lag = lag
        self._history = []
        self.t = -1

    def push(self, joints):
        p0 = np.asarray(joints, dtype=np.float64).ravel()
        if p0.size != 3 * self.n_joints:
            raise InputError(f"expected {self.n_joints} joints, got {p0.size / 3:g}")
        self._history.append(p0)
        if len(self._history) > 2 * self.lag + 1:
            self._history.pop(0)
        self.t += 1
        h = self._history
        p1 = h[max(len(h) - 1 - self.lag, 0)]
        p2 = h[max(len(h) - 1 - 2 * self.lag, 0)]
        lag = self.lag
        return np.concatenate([p0, (p0 - p1) / lag, (p0 - 2.0 * p1 + p2) / (lag * lag)])


@dataclass
class Detection:
    labels: np.ndarray
    locs: np.ndarray
    segments: list


class OnlineActionDetector(BaseEstimator):
    """Skeleton-stream detector: feature extraction, context forest, beta gate.

    ``fit`` trains ``forest`` on per-frame features, passing spatial and
    temporal contexts only for the objectives the forest samples (so a
    plain entropy forest never sees contexts and its leaves carry no
    location information), then calibrates ``beta`` unless one is given.
    """

    def __init__(self, forest=None, deriv_lag=1, beta=None):
        self.forest = forest
        self.deriv_lag = deriv_lag
        self.beta = beta

    def _features(self, stream):
        return stream_features(stream.positions, self.deriv_lag)

    def fit(self, streams, ground_truths, contexts=None, calibration=None):
        """Train on labeled streams.

        ``calibration`` optionally holds ``(streams, ground_truths)`` used for
        beta selection instead of the training streams.
        """
        streams = list(streams)
        ground_truths = list(ground_truths)
        if not streams or len(streams) != len(ground_truths):
            raise InputError("need one ground truth per training stream")
        n_joints = {s.n_joints for s in streams}
        if len(n_joints) != 1:
            raise InputError("all streams must have the same joint count")
        forest = clone(self.forest) if self.forest is not None else ContextForestClassifier()
        params = forest._params()
        X = np.vstack([self._features(s) for s in streams])
        y = np.concatenate([g.labels() for g in ground_truths])
        spatial = temporal = None
        if params.uses_spatial:
            if contexts is None:
                raise InputError("this objective mix needs spatial context matrices")
            contexts = list(contexts)
            for s, c in zip(streams, contexts):
                if len(c) != s.n_frames:
                    raise InputError(f"context rows do not match stream {s.stream_id!r}")
            spatial = np.vstack([c.rows for c in contexts])
        if params.uses_temporal:
            temporal = np.concatenate([stream_temporal_contexts(g) for g in ground_truths])
        self.forest_ = forest.fit(X, y, spatial, temporal)
        self.n_joints_ = n_joints.pop()
        self.classes_ = self.forest_.classes_
        if self.beta is None:
            cal_streams, cal_truths = calibration if calibration is not None else (streams, ground_truths)
            self.calibrate(cal_streams, cal_truths)
        else:
            self.beta_ = float(self.beta)
        return self

    def calibrate(self, streams, ground_truths):
        """Select ``beta_`` on labeled streams; returns the chosen value."""
        check_is_fitted(self, "forest_")
        preds = [self.frame_predictions(s) for s in streams]
        self.beta_, self.calibration_errors_ = select_beta(
            preds, [g.labels() for g in ground_truths], self.classes_)
        return self.beta_

    def frame_predictions(self, stream):
        check_is_fitted(self, "forest_")
        if stream.n_joints != self.n_joints_:
            raise InputError(f"stream has {stream.n_joints} joints, model expects {self.n_joints_}")
        return self.forest_.predict_proba_loc(self._features(stream))

    def predict(self, stream):
        """Causal per-frame labels."""
        return self.detect(stream).labels

    def detect(self, stream):
        dists, locs = self.frame_predictions(stream)
        labels, segments = run_detector(dists, locs, self.classes_, self.beta_)
        return Detection(labels, locs, segments)

    def streaming(self):
        """Fresh per-stream online detector sharing this fitted model."""
        check_is_fitted(self, "beta_")
        return StreamingDetector(self)

    @property
    def n_features_(self):
        return feature_dim(self.n_joints_)


class StreamingDetector:
    """Frame-at-a-time detection for one stream.

    ``push`` takes the joints of the next frame and returns
    ``(t, causal_label, mean_loc)``; ``close`` ends the stream and returns
    every finalized segment.
    """

    def __init__(self, model, counter=None):
        self.model = model
        self.buffer = OnlineFeatureBuffer(model.n_joints_, model.deriv_lag)
        self.state = DetectorState(model.beta_, model.classes_)
        self.counter = counter

    def push(self, joints):
        x = self.buffer.push(joints)
        pred = predict_frame(self.model.forest_, x, self.counter)
        label, _ = step(self.state, self.buffer.t, pred)
        return self.buffer.t, label, pred.mean_loc

    def close(self):
        if self.buffer.t < 0:
            return []
        finalize(self.state, self.buffer.t)
        return list(self.state.segments)
