import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crowdcount.geometry import Box2D, ScoredBox, clamp_box, iou, nms, rescale_box


def box(x, y, w, h):
    return Box2D(float(x), float(y), float(w), float(h))


# ---------------------------------------------------------------------------
# independent oracles

def raster_iou(a: Box2D, b: Box2D) -> float:
    """Pixel-set IoU for integer-coordinate boxes."""
    x0 = int(min(a.x, b.x))
    y0 = int(min(a.y, b.y))
    x1 = int(max(a.x2, b.x2))
    y1 = int(max(a.y2, b.y2))
    grid_a = np.zeros((y1 - y0, x1 - x0), dtype=bool)
    grid_b = np.zeros_like(grid_a)
    grid_a[int(a.y) - y0:int(a.y2) - y0, int(a.x) - x0:int(a.x2) - x0] = True
    grid_b[int(b.y) - y0:int(b.y2) - y0, int(b.x) - x0:int(b.x2) - x0] = True
    inter = np.logical_and(grid_a, grid_b).sum()
    union = np.logical_or(grid_a, grid_b).sum()
    return inter / union


def corner_iou(a: Box2D, b: Box2D) -> float:
    if a == b:
        return 1.0
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return min(inter / (a.w * a.h + b.w * b.h - inter), 1.0)


def reference_nms(boxes, threshold):
    """O(n^2) greedy reference: repeatedly pop the best remaining box."""
    remaining = list(enumerate(boxes))
    kept = []
    while remaining:
        best = max(remaining, key=lambda pair: (pair[1].score, -pair[0]))
        kept.append(best[1])
        remaining = [
            (i, sb) for i, sb in remaining
            if i != best[0] and corner_iou(sb.box, best[1].box) <= threshold
        ]
    return kept


int_boxes = st.builds(
    box,
    st.integers(0, 60), st.integers(0, 60),
    st.integers(1, 40), st.integers(1, 40),
)
float_boxes = st.builds(
    box,
    st.floats(-100, 100), st.floats(-100, 100),
    st.floats(0.1, 80), st.floats(0.1, 80),
)
scored_boxes = st.builds(
    lambda b, s: ScoredBox(b, s),
    float_boxes,
    st.floats(0, 1).map(lambda s: round(s, 3)),
)


# ---------------------------------------------------------------------------
# iou

def test_iou_identical_boxes():
    b = box(0, 0, 10, 10)
    assert iou(b, b) == 1.0


def test_iou_disjoint():
    assert iou(box(0, 0, 10, 10), box(100, 100, 5, 5)) == 0.0


def test_iou_half_overlap_against_raster_oracle():
    a, b = box(0, 0, 10, 10), box(5, 0, 10, 10)
    assert iou(a, b) == pytest.approx(1 / 3, abs=1e-12)
    assert iou(a, b) == pytest.approx(raster_iou(a, b), abs=1e-12)


def test_invalid_box_rejected():
    with pytest.raises(ValueError):
        Box2D(0, 0, 0, 10)
    with pytest.raises(ValueError):
        Box2D(0, 0, 10, -1)
    with pytest.raises(ValueError):
        Box2D(math.nan, 0, 10, 10)
    with pytest.raises(ValueError):
        ScoredBox(box(0, 0, 1, 1), math.inf)


@given(int_boxes, int_boxes)
def test_iou_matches_raster_oracle(a, b):
    expected = raster_iou(a, b)
    got = iou(a, b)
    assert got == pytest.approx(expected, rel=1e-9, abs=1e-12)


@given(float_boxes, float_boxes)
def test_iou_symmetric_and_bounded(a, b):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0
    assert iou(a, a) == 1.0


# ---------------------------------------------------------------------------
# nms

def test_nms_singleton():
    sb = ScoredBox(box(0, 0, 10, 10), 0.9)
    assert nms([sb], 0.5) == [sb]


def test_nms_duplicate_boxes_keep_highest_score():
    a = ScoredBox(box(0, 0, 10, 10), 0.9)
    b = ScoredBox(box(0, 0, 10, 10), 0.8)
    assert nms([a, b], 0.5) == [a]


def test_nms_keeps_distant_and_drops_overlapping():
    a = ScoredBox(box(0, 0, 10, 10), 0.9)
    b = ScoredBox(box(1, 1, 10, 10), 0.8)   # iou with a = 81/119
    c = ScoredBox(box(50, 50, 10, 10), 0.7)
    assert iou(a.box, b.box) == pytest.approx(81 / 119)
    assert nms([a, b, c], 0.5) == [a, c]


def test_nms_threshold_validation():
    with pytest.raises(ValueError):
        nms([], 1.5)


def test_nms_tie_broken_by_input_index():
    a = ScoredBox(box(0, 0, 10, 10), 0.5)
    b = ScoredBox(box(0, 0, 10, 10), 0.5)
    result = nms([a, b], 0.5)
    assert result == [a]


@given(st.lists(scored_boxes, max_size=12), st.floats(0, 1))
def test_nms_matches_reference(boxes, threshold):
    got = nms(boxes, threshold)
    expected = reference_nms(boxes, threshold)
    assert got == expected


@given(st.lists(scored_boxes, max_size=12), st.floats(0, 1))
def test_nms_idempotent_and_subset(boxes, threshold):
    once = nms(boxes, threshold)
    assert nms(once, threshold) == once
    assert all(b in boxes for b in once)
    scores = [b.score for b in once]
    assert scores == sorted(scores, reverse=True)


# ---------------------------------------------------------------------------
# rescale_box

def test_rescale_box_halves_coordinates():
    assert rescale_box(box(20, 20, 40, 40), 2.0) == box(10, 10, 20, 20)


def test_rescale_box_identity():
    b = box(3.5, 7.25, 11, 13)
    assert rescale_box(b, 1.0) == b


def test_rescale_box_upscale():
    assert rescale_box(box(3, 5, 7, 9), 0.5) == box(6, 10, 14, 18)


def test_rescale_box_rejects_bad_scale():
    with pytest.raises(ValueError):
        rescale_box(box(0, 0, 1, 1), 0.0)
    with pytest.raises(ValueError):
        rescale_box(box(0, 0, 1, 1), -2.0)


@given(float_boxes, st.floats(0.01, 100))
def test_rescale_box_round_trips(b, scale):
    back = rescale_box(rescale_box(b, scale), 1.0 / scale)
    for attr in ("x", "y", "w", "h"):
        assert abs(getattr(back, attr) - getattr(b, attr)) <= 1e-9 * max(
            1.0, abs(getattr(b, attr)))


# ---------------------------------------------------------------------------
# clamp_box

def test_clamp_box_inside_untouched():
    b = box(5, 5, 10, 10)
    assert clamp_box(b, 100, 100) == b


def test_clamp_box_cuts_to_bounds():
    assert clamp_box(box(-5, -5, 20, 20), 100, 100) == box(0, 0, 15, 15)


def test_clamp_box_collapses_to_none():
    assert clamp_box(box(200, 200, 10, 10), 100, 100) is None
