import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oadforest.detector import DetectedSegment
from oadforest.exceptions import InputError
from oadforest.metrics import boundary_scores, event_fscore, frame_fscore, gt_anchors
from oadforest.streams import GroundTruth

labels = st.lists(st.integers(0, 3), min_size=1, max_size=60)


def test_frame_perfect():
    gt = [0, 1, 1, 2, 0]
    scores = frame_fscore(gt, gt)
    assert scores.overall_f1 == 1.0
    assert all(v == 1.0 for v in scores.per_class_f1.values())


def test_frame_all_background():
    assert frame_fscore([0] * 6, [0, 1, 1, 2, 2, 0]).overall_f1 == 0.0


def test_frame_hand_counted():
    gt = [1] * 5 + [0] * 5
    pred = [0, 0] + [1] * 5 + [0] * 3
    scores = frame_fscore(pred, gt)
    assert scores.per_class_f1[1] == pytest.approx(0.6, abs=1e-12)
    assert scores.overall_f1 == pytest.approx(0.6, abs=1e-12)


def test_frame_background_pooling_switch():
    gt = [0, 0, 1, 1]
    pred = [0, 1, 1, 1]
    assert frame_fscore(pred, gt).overall_f1 == pytest.approx(0.8)
    assert frame_fscore(pred, gt, include_background=True).overall_f1 == pytest.approx(0.75)


def test_frame_nothing_to_score():
    assert frame_fscore([0, 0], [0, 0]).overall_f1 == 1.0
    with pytest.raises(InputError):
        frame_fscore([0], [0, 1])


@settings(max_examples=60, deadline=None)
@given(labels, st.data())
def test_frame_invariants(gt, data):
    pred = data.draw(st.lists(st.integers(0, 3), min_size=len(gt), max_size=len(gt)))
    scores = frame_fscore(pred, gt)
    assert 0.0 <= scores.overall_f1 <= 1.0
    assert all(0.0 <= f <= 1.0 for f in scores.per_class_f1.values())
    row_sums = dict(zip(scores.labels.tolist(), scores.confusion.sum(axis=1).tolist()))
    for c in set(gt):
        assert row_sums[c] == gt.count(c)


def test_event_perfect():
    gt = GroundTruth.from_segments([(10, 20, 1), (40, 50, 2)], 60)
    preds = [DetectedSegment(s.start, s.end, s.class_id, 1.0) for s in gt.segments]
    assert event_fscore(preds, gt_anchors(gt), 0.0, 30.0).f1_at_delta == 1.0


def test_event_zero_tolerance_one_frame_off():
    assert event_fscore([(11, 20, 1)], [(10, 1)], 0.0, 30.0).f1_at_delta == 0.0
    assert event_fscore([(11, 20, 1)], [(10, 1)], 34.0, 30.0).f1_at_delta == 1.0


def test_event_hand_counted():
    scores = event_fscore([(10, 20, 1), (70, 80, 2)], [(10, 1), (40, 2)], 333.0, 30.0)
    assert (scores.precision, scores.recall, scores.f1_at_delta) == (0.5, 0.5, 0.5)
    assert len(scores.matches) == 1


def test_event_class_must_agree_and_match_once():
    assert event_fscore([(10, 20, 2)], [(10, 1)], 1000.0, 30.0).f1_at_delta == 0.0
    scores = event_fscore([(9, 9, 1), (10, 20, 1)], [(10, 1)], 1000.0, 30.0)
    assert len(scores.matches) == 1 and scores.precision == 0.5


def test_event_greedy_is_optimal_on_the_line():
    # a nearest-first matcher would pair 10 with 12 and leave 14 unmatched
    scores = event_fscore([(10, 10, 1), (14, 14, 1)], [(8, 1), (12, 1)], 100.0, 30.0)
    assert scores.recall == 1.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), st.integers(1, 2)), max_size=8),
       st.lists(st.tuples(st.integers(0, 100), st.integers(1, 2)), max_size=8),
       st.floats(0, 500), st.floats(0, 500))
def test_event_f1_monotone_in_delta(pred, gt, d1, d2):
    segs = [(s, s, c) for s, c in pred]
    lo, hi = sorted((d1, d2))
    a = event_fscore(segs, gt, lo, 30.0)
    b = event_fscore(segs, gt, hi, 30.0)
    assert len(a.matches) <= len(b.matches)
    assert len(b.matches) <= min(len(pred), len(gt))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), st.integers(1, 2)), max_size=8),
       st.lists(st.tuples(st.integers(0, 100), st.integers(1, 2)), max_size=8),
       st.integers(-50, 50))
def test_event_shift_invariant(pred, gt, shift):
    segs = [(s, s, c) for s, c in pred]
    moved_segs = [(s + shift, s + shift, c) for s, _, c in segs]
    moved_gt = [(f + shift, c) for f, c in gt]
    assert event_fscore(segs, gt, 200.0, 30.0).f1_at_delta == \
        event_fscore(moved_segs, moved_gt, 200.0, 30.0).f1_at_delta


def test_boundary_examples():
    gt = [(0, 9, 1), (10, 14, 0)]
    exact = boundary_scores([(0, 9, 1), (10, 14, 0)], gt)
    assert (exact.sl, exact.el) == (1.0, 1.0)
    empty = boundary_scores([], gt)
    assert (empty.sl, empty.el) == (0.0, 0.0)
    b = boundary_scores([(0, 1, 0), (2, 9, 1), (10, 14, 0)], gt)
    assert b.sl == pytest.approx(0.8) and b.el == 1.0


def test_boundary_picks_highest_overlap():
    b = boundary_scores([(0, 2, 1), (3, 9, 1)], [(0, 9, 1)])
    assert b.sl == pytest.approx(0.7) and b.el == 1.0


@settings(max_examples=40, deadline=None)
@given(labels, labels)
def test_boundary_range(a, b):
    n = min(len(a), len(b))
    pred = GroundTruth.from_labels(a[:n]).segments
    gt = GroundTruth.from_labels(b[:n]).segments
    s = boundary_scores(pred, gt)
    assert 0.0 <= s.sl <= 1.0 and 0.0 <= s.el <= 1.0
