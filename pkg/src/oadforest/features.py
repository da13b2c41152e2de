"""Test-time skeleton features and training-only context vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .exceptions import InputError


@dataclass(frozen=True)
class FrameFeature:
    values: np.ndarray  # [p, dp, ddp], length 9 * n_joints


@dataclass(frozen=True)
class ContextVector:
    spatial: np.ndarray
    temporal: float


def feature_dim(n_joints):
    return 9 * n_joints


def _check_lag(lag):
    if int(lag) != lag or lag < 1:
        raise InputError(f"derivative lag must be a positive integer, got {lag}")
    return int(lag)


def extract_frame_feature(stream, t, lag=1):
    """Positions and causal first/second differences at frame ``t``.

    Only frames ``t - 2*lag .. t`` are read; indices before the start of
    the stream are clamped to frame 0.
    """
    lag = _check_lag(lag)
    if not 0 <= t < stream.n_frames:
        raise InputError(f"frame index {t} out of range [0, {stream.n_frames})")
    pos = stream.positions
    p0 = pos[t].ravel()
    p1 = pos[max(t - lag, 0)].ravel()
    p2 = pos[max(t - 2 * lag, 0)].ravel()
    return FrameFeature(_stack(p0, p1, p2, lag))


def _stack(p0, p1, p2, lag):
    return np.concatenate([p0, (p0 - p1) / lag, (p0 - 2.0 * p1 + p2) / (lag * lag)], axis=-1)


def stream_features(positions, lag=1):
    """Vectorized :func:`extract_frame_feature` over every frame.

    ``positions`` is ``(T, n_joints, 3)`` or already flattened ``(T, 3n)``.
    """
    lag = _check_lag(lag)
    pos = np.asarray(positions, dtype=np.float64)
    pos = pos.reshape(pos.shape[0], -1)
    idx = np.arange(pos.shape[0])
    p1 = pos[np.maximum(idx - lag, 0)]
    p2 = pos[np.maximum(idx - 2 * lag, 0)]
    return _stack(pos, p1, p2, lag)


class SkeletonFeatures(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping one stream's joint positions to features.

    Rows of ``X`` must be consecutive frames of a single stream, each row the
    flattened ``(x, y, depth)`` coordinates of all joints.
    """

    def __init__(self, lag=1):
        self.lag = lag

    def fit(self, X, y=None):
        X = check_array(X)
        if X.shape[1] % 3:
            raise InputError("each row must hold 3 coordinates per joint")
        _check_lag(self.lag)
        self.n_features_in_ = X.shape[1]
        self.n_joints_ = X.shape[1] // 3
        return self

    def transform(self, X):
        X = check_array(X)
        if X.shape[1] % 3:
            raise InputError("each row must hold 3 coordinates per joint")
        return stream_features(X, self.lag)

    def __sklearn_is_fitted__(self):
        return True


def temporal_context(segment, t):
    """Relative location ``(t - start) / (end - start + 1)`` of ``t`` in ``segment``."""
    start, end = int(segment[0]), int(segment[1])
    if not start <= t <= end:
        raise InputError(f"frame {t} lies outside segment ({start}, {end})")
    return (t - start) / (end - start + 1)


def assemble_context(ctx_row, gt, t):
    """Pair a spatial context row with the temporal location of frame ``t``."""
    seg = gt.segment_at(t)
    return ContextVector(np.asarray(ctx_row, dtype=np.float64), temporal_context(seg, t))


def stream_temporal_contexts(gt):
    """Relative location of every frame within the segment that contains it."""
    out = np.empty(gt.n_frames)
    for seg in gt.segments:
        out[seg.start:seg.end + 1] = np.arange(seg.length) / seg.length
    return out
