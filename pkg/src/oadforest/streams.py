"""Skeleton streams, annotations and per-frame context matrices.

Text formats (UTF-8, LF line endings)::

    oadf v1 n_joints=<n> fps=<f>
    <t> x1 y1 d1 ... xn yn dn          # one line per frame
    #segments                          # optional annotation block
    <start> <end> <class_id>           # inclusive frame range

    ctx v1 dim=<d> rows=<T>
    <d whitespace separated floats>    # one row per frame

Class id 0 is reserved for background ("no-action"); gaps left by an
annotation block are materialized as class-0 segments on load.
"""
from __future__ import annotations

import bisect
import io
import math
import os
import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import AlignmentError, FormatError, InputError

BACKGROUND = 0

_STREAM_HEADER = re.compile(r"^oadf v1 n_joints=(\d+) fps=(\S+)$")
_CTX_HEADER = re.compile(r"^ctx v1 dim=(\d+) rows=(\d+)$")
_SEGMENTS_MARKER = "#segments"


class JointFrame(NamedTuple):
    t: int
    joints: np.ndarray  # (n_joints, 3): x, y, depth


class Segment(NamedTuple):
    start: int
    end: int
    class_id: int

    @property
    def length(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class SkeletonStream:
    """Time-ordered joint positions of one recording.

    ``positions`` has shape ``(n_frames, n_joints, 3)``; frame ``t`` is row
    ``t``.
    """

    positions: np.ndarray
    frame_rate: float = 30.0
    stream_id: str = ""

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 3 or pos.shape[2] != 3:
            raise InputError(f"positions must have shape (T, n, 3), got {pos.shape}")
        if pos.shape[0] < 1 or pos.shape[1] < 1:
            raise InputError("a stream needs at least one frame and one joint")
        if not np.all(np.isfinite(pos)):
            raise InputError("joint coordinates must be finite")
        if not (self.frame_rate > 0 and math.isfinite(self.frame_rate)):
            raise InputError(f"frame rate must be positive, got {self.frame_rate}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_frames(self):
        return self.positions.shape[0]

    @property
    def n_joints(self):
        return self.positions.shape[1]

    def __len__(self):
        return self.n_frames

    def frame(self, t):
        return JointFrame(t, self.positions[t])

    @property
    def frames(self):
        return [self.frame(t) for t in range(self.n_frames)]


@dataclass(frozen=True)
class GroundTruth:
    """Segment annotation that tiles ``[0, n_frames)`` exactly."""

    segments: tuple
    n_frames: int
    _starts: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = tuple(Segment(int(s), int(e), int(c)) for s, e, c in self.segments)
        expected = 0
        for seg in segs:
            if seg.start != expected or seg.end < seg.start or seg.class_id < 0:
                raise InputError(f"segments must tile [0, {self.n_frames}) in order; bad {seg}")
            expected = seg.end + 1
        if expected != self.n_frames:
            raise InputError(f"segments cover [0, {expected}) but stream has {self.n_frames} frames")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_starts", [s.start for s in segs])

    @classmethod
    def from_segments(cls, segments, n_frames):
        """Build a tiling annotation, filling uncovered frames with background."""
        filled = []
        cursor = 0
        for s, e, c in sorted(segments):
            if s < cursor:
                raise InputError(f"segment ({s}, {e}, {c}) overlaps its predecessor")
            if s > cursor:
                filled.append(Segment(cursor, s - 1, BACKGROUND))
            filled.append(Segment(s, e, c))
            cursor = e + 1
        if cursor < n_frames:
            filled.append(Segment(cursor, n_frames - 1, BACKGROUND))
        return cls(tuple(filled), n_frames)

    @classmethod
    def from_labels(cls, labels):
        labels = np.asarray(labels)
        if labels.ndim != 1 or labels.size == 0:
            raise InputError("labels must be a non-empty 1-D sequence")
        change = np.flatnonzero(np.diff(labels)) + 1
        starts = np.concatenate([[0], change])
        ends = np.concatenate([change - 1, [labels.size - 1]])
        return cls(tuple(Segment(int(s), int(e), int(labels[s])) for s, e in zip(starts, ends)),
                   int(labels.size))

    def segment_at(self, t):
        if not 0 <= t < self.n_frames:
            raise InputError(f"frame {t} is not covered by the annotation")
        return self.segments[bisect.bisect_right(self._starts, t) - 1]

    def labels(self):
        out = np.empty(self.n_frames, dtype=np.int64)
        for seg in self.segments:
            out[seg.start:seg.end + 1] = seg.class_id
        return out

    @property
    def actions(self):
        return [s for s in self.segments if s.class_id != BACKGROUND]

    @property
    def label_set(self):
        return sorted({s.class_id for s in self.segments})


@dataclass(frozen=True)
class ContextMatrix:
    """One spatial-context row per frame."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] < 1:
            raise InputError(f"context rows must be a 2-D array with dim >= 1, got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise InputError("context entries must be finite")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def dim(self):
        return self.rows.shape[1]

    def __len__(self):
        return self.rows.shape[0]


# --------------------------------------------------------------------------
# skeleton stream text format

def _fmt(value):
    return repr(float(value))


def parse_stream_header(line, lineno=1):
    m = _STREAM_HEADER.match(line.rstrip())
    if not m:
        raise FormatError(f"malformed header {line.rstrip()!r}", lineno)
    n_joints = int(m.group(1))
    try:
        fps = float(m.group(2))
    except ValueError:
        raise FormatError(f"malformed fps {m.group(2)!r}", lineno) from None
    if n_joints < 1 or not (fps > 0 and math.isfinite(fps)):
        raise FormatError("n_joints and fps must be positive", lineno)
    return n_joints, fps


def parse_frame_line(line, n_joints, lineno):
    """Parse ``t x1 y1 d1 ...`` into ``(t, joints)``."""
    tokens = line.split()
    if len(tokens) != 1 + 3 * n_joints:
        raise FormatError(
            f"inconsistent joint count: expected {n_joints} joints, "
            f"found {(len(tokens) - 1) / 3:g}", lineno)
    try:
        t = int(tokens[0])
        joints = np.array([float(v) for v in tokens[1:]]).reshape(n_joints, 3)
    except ValueError as exc:
        raise FormatError(f"unparsable frame line: {exc}", lineno) from None
    if not np.all(np.isfinite(joints)):
        raise FormatError("non-finite joint coordinate", lineno)
    return t, joints


def parse_skeleton_stream(text, stream_id=""):
    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise FormatError("missing header", 1)
    n_joints, fps = parse_stream_header(lines[0], 1)

    frames = {}
    frame_lines = {}
    raw_segments = []
    in_segments = False
    for lineno, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped == _SEGMENTS_MARKER:
            if in_segments:
                raise FormatError("duplicate #segments block", lineno)
            in_segments = True
            continue
        if in_segments:
            tokens = stripped.split()
            if len(tokens) != 3:
                raise FormatError("segment lines need 'start end class_id'", lineno)
            try:
                s, e, c = (int(v) for v in tokens)
            except ValueError:
                raise FormatError(f"non-integer segment field in {stripped!r}", lineno) from None
            raw_segments.append((s, e, c, lineno))
            continue
        t, joints = parse_frame_line(stripped, n_joints, lineno)
        if t in frames:
            raise FormatError(f"duplicate frame index {t}", lineno)
        frames[t] = joints
        frame_lines[t] = lineno

    if not frames:
        raise FormatError("stream has no frames", len(lines))
    n_frames = len(frames)
    for t in sorted(frames):
        if not 0 <= t < n_frames:
            raise FormatError(f"frame indices must be consecutive from 0; got {t}", frame_lines[t])
    positions = np.stack([frames[t] for t in range(n_frames)])
    stream = SkeletonStream(positions, fps, stream_id)

    gt = None
    if in_segments:
        cursor = 0
        for s, e, c, lineno in raw_segments:
            if e < s:
                raise FormatError(f"segment end {e} precedes start {s}", lineno)
            if s < cursor:
                raise FormatError(f"overlapping or unsorted segment ({s}, {e}, {c})", lineno)
            if e >= n_frames:
                raise FormatError(f"segment ({s}, {e}, {c}) exceeds stream length {n_frames}", lineno)
            if c < 0:
                raise FormatError(f"negative class id {c}", lineno)
            cursor = e + 1
        gt = GroundTruth.from_segments([(s, e, c) for s, e, c, _ in raw_segments], n_frames)
    return stream, gt


def load_skeleton_stream(path):
    """Read a stream file; returns ``(stream, ground_truth_or_None)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    stream_id = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return parse_skeleton_stream(text, stream_id)


def format_skeleton_stream(stream, gt=None):
    out = io.StringIO()
    out.write(f"oadf v1 n_joints={stream.n_joints} fps={_fmt(stream.frame_rate)}\n")
    flat = stream.positions.reshape(stream.n_frames, -1)
    for t in range(stream.n_frames):
        out.write(str(t) + " " + " ".join(_fmt(v) for v in flat[t]) + "\n")
    if gt is not None:
        if gt.n_frames != stream.n_frames:
            raise InputError("annotation length does not match the stream")
        out.write(_SEGMENTS_MARKER + "\n")
        for seg in gt.segments:
            out.write(f"{seg.start} {seg.end} {seg.class_id}\n")
    return out.getvalue()


def write_skeleton_stream(stream, path, gt=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_skeleton_stream(stream, gt))


# --------------------------------------------------------------------------
# context matrix text format

def parse_context_matrix(text, n_frames=None):
    lines = text.split("\n")
    m = _CTX_HEADER.match(lines[0].rstrip()) if lines else None
    if not m:
        raise FormatError(f"malformed context header {lines[0].rstrip()!r}" if lines else "empty file", 1)
    dim, n_rows = int(m.group(1)), int(m.group(2))
    if dim < 1:
        raise FormatError("context dim must be positive", 1)
    if n_frames is not None and n_rows != n_frames:
        raise AlignmentError(f"context file declares {n_rows} rows but the stream has {n_frames} frames")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = np.array(line.split(), dtype=np.float64)
        except ValueError:
            raise FormatError("unparsable context value", lineno) from None
        if row.size != dim:
            raise FormatError(f"expected {dim} values, found {row.size}", lineno)
        if not np.all(np.isfinite(row)):
            raise FormatError("non-finite context entry", lineno)
        rows.append(row)
    if len(rows) != n_rows:
        raise FormatError(f"context file declares {n_rows} rows but contains {len(rows)}")
    return ContextMatrix(np.vstack(rows) if rows else np.empty((0, dim)))


def load_context_matrix(path, stream=None):
    """Read a context file, checking row alignment against ``stream``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_context_matrix(text, None if stream is None else stream.n_frames)


def write_context_matrix(ctx, path):
    rows = ctx.rows
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"ctx v1 dim={ctx.dim} rows={len(ctx)}\n")
        np.savetxt(fh, rows, fmt="%.17g", delimiter=" ")


# --------------------------------------------------------------------------
# synthetic data

@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic generator.

    ``template_seed`` fixes the "world" (class trajectories and context
    means) while ``seed`` drives one stream's segment layout and noise, so
    train and test streams drawn with different ``seed`` share classes.
    """

    n_classes: int = 4
    n_joints: int = 6
    segments_per_stream: int = 8
    frames_per_segment_range: tuple = (30, 60)
    background_range: tuple = (10, 30)
    noise_scale: float = 0.05
    context_dim: int = 16
    context_snr: float = 4.0
    ambiguity_pairs: tuple = ((1, 2),)
    frame_rate: float = 30.0
    amplitude: float = 0.5
    seed: int = 0
    template_seed: int = 0

    def __post_init__(self):
        for name in ("n_classes", "n_joints", "segments_per_stream", "context_dim"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be positive")
        for name in ("frames_per_segment_range", "background_range"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise InputError(f"{name} must satisfy 1 <= lo <= hi, got {(lo, hi)}")
            object.__setattr__(self, name, (int(lo), int(hi)))
        if self.context_snr < 0 or self.noise_scale < 0:
            raise InputError("context_snr and noise_scale must be non-negative")
        pairs = tuple((int(a), int(b)) for a, b in self.ambiguity_pairs)
        for a, b in pairs:
            if a == b or not (1 <= a <= self.n_classes and 1 <= b <= self.n_classes):
                raise InputError(f"ambiguity pair {(a, b)} must name two distinct action classes")
        object.__setattr__(self, "ambiguity_pairs", pairs)

    def replace(self, **changes):
        kwargs = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kwargs.update(changes)
        return SynthConfig(**kwargs)


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def _edge_weight(phase):
    """0 on the middle half of a segment, ramping to 1 towards both ends."""
    ramp = np.clip(np.maximum((0.25 - phase) / 0.1, (phase - 0.75) / 0.1), 0.0, 1.0)
    return ramp * ramp * (3.0 - 2.0 * ramp)


class _World:
    """Class trajectories and context means shared by all streams of a config."""

    def __init__(self, config):
        rng = _rng(config.template_seed)
        k, n = config.n_classes, config.n_joints
        self.rest = rng.standard_normal((n, 3))
        amp = np.full(k + 1, config.amplitude)
        amp[BACKGROUND] = 0.1 * config.amplitude
        self.amps = rng.standard_normal((k + 1, 2, n, 3)) * amp[:, None, None, None]
        self.phases = rng.uniform(0.0, 2 * np.pi, size=(k + 1, 2, n, 3))
        self.context_means = rng.standard_normal((k + 1, config.context_dim))
        self.pairs = config.ambiguity_pairs

    def _own(self, class_id, phase):
        phase = np.asarray(phase, dtype=np.float64)[:, None, None, None]
        h = np.array([1.0, 2.0])[None, :, None, None]
        waves = self.amps[class_id][None] * np.sin(2 * np.pi * h * phase + self.phases[class_id][None])
        return self.rest[None] + waves.sum(axis=1)

    def template(self, class_id, phase):
        """Expected joint positions, shape ``(len(phase), n_joints, 3)``."""
        phase = np.asarray(phase, dtype=np.float64)
        out = self._own(class_id, phase)
        for a, b in self.pairs:
            if b == class_id:
                shared = self.template(a, phase)
                w = _edge_weight(phase)[:, None, None]
                out = shared + w * (out - shared)
        return out


def synthetic_template(config, class_id, phase):
    """Noise-free class trajectory at relative locations ``phase``."""
    return _World(config).template(class_id, phase)


def generate_synthetic(config):
    """Draw one stream with its context rows and annotation.

    Returns ``(stream, contexts, ground_truth)``; identical configs give
    bit-identical outputs.
    """
    world = _World(config)
    rng = _rng(config.seed)
    segments = []
    cursor = 0
    for _ in range(config.segments_per_stream):
        gap = int(rng.integers(config.background_range[0], config.background_range[1] + 1))
        segments.append(Segment(cursor, cursor + gap - 1, BACKGROUND))
        cursor += gap
        length = int(rng.integers(config.frames_per_segment_range[0],
                                  config.frames_per_segment_range[1] + 1))
        cls = int(rng.integers(1, config.n_classes + 1))
        segments.append(Segment(cursor, cursor + length - 1, cls))
        cursor += length
    gap = int(rng.integers(config.background_range[0], config.background_range[1] + 1))
    segments.append(Segment(cursor, cursor + gap - 1, BACKGROUND))
    n_frames = cursor + gap

    positions = np.empty((n_frames, config.n_joints, 3))
    labels = np.empty(n_frames, dtype=np.int64)
    for seg in segments:
        phase = np.arange(seg.length) / seg.length
        positions[seg.start:seg.end + 1] = world.template(seg.class_id, phase)
        labels[seg.start:seg.end + 1] = seg.class_id
    positions += config.noise_scale * rng.standard_normal(positions.shape)
    contexts = (math.sqrt(config.context_snr) * world.context_means[labels]
                + rng.standard_normal((n_frames, config.context_dim)))

    stream = SkeletonStream(positions, config.frame_rate, f"synth-{config.seed}")
    return stream, ContextMatrix(contexts), GroundTruth(tuple(segments), n_frames)


def iter_synthetic(config, n_streams):
    """``n_streams`` streams sharing ``config``'s world, with derived seeds."""
    children = np.random.SeedSequence(config.seed).spawn(n_streams)
    for child in children:
        seed = int(child.generate_state(1, np.uint64)[0])
        yield generate_synthetic(config.replace(seed=seed))

