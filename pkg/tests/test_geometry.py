import numpy as np
import pytest
from hypothesis import given, strategies as st

from motpipe.geometry import BBox, hflip_box, iou, iou_matrix, nms

from conftest import mkdet, random_box
from oracles import iou_ref, nms_oracle

finite = st.floats(min_value=-500, max_value=500, allow_nan=False)
positive = st.floats(min_value=0.5, max_value=300, allow_nan=False)


def test_bbox_rejects_degenerate():
    with pytest.raises(ValueError):
        BBox(0, 0, 0, 10)
    with pytest.raises(ValueError):
        BBox(0, 0, 10, -1)


def test_iou_identical_boxes():
    b = BBox(0, 0, 10, 10)
    assert iou(b, b) == 1.0


def test_iou_disjoint():
    assert iou(BBox(0, 0, 10, 10), BBox(100, 100, 5, 5)) == 0.0


def test_iou_half_overlap():
    # intersection 5x10 = 50, union 100 + 100 - 50 = 150
    got = iou(BBox(0, 0, 10, 10), BBox(5, 0, 10, 10))
    assert got == pytest.approx(50 / 150, abs=1e-12)


def test_iou_shared_edge_is_zero():
    assert iou(BBox(0, 0, 10, 10), BBox(10, 0, 10, 10)) == 0.0


@given(x1=finite, y1=finite, w1=positive, h1=positive, x2=finite, y2=finite, w2=positive, h2=positive)
def test_iou_symmetric_and_bounded(x1, y1, w1, h1, x2, y2, w2, h2):
    a, b = BBox(x1, y1, w1, h1), BBox(x2, y2, w2, h2)
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)


def test_iou_matches_reference_on_random_pairs():
    rng = np.random.default_rng(7)
    for _ in range(300):
        a, b = random_box(rng), random_box(rng)
        assert iou(a, b) == pytest.approx(iou_ref(a.as_tuple(), b.as_tuple()), abs=1e-12)


def test_iou_matrix_agrees_with_scalar():
    rng = np.random.default_rng(3)
    boxes_a = [random_box(rng) for _ in range(7)]
    boxes_b = [random_box(rng) for _ in range(5)]
    mat = iou_matrix(boxes_a, boxes_b)
    for i, a in enumerate(boxes_a):
        for j, b in enumerate(boxes_b):
            assert mat[i, j] == pytest.approx(iou(a, b), abs=1e-12)


def test_hflip_basic():
    assert hflip_box(BBox(0, 0, 10, 10), 100) == BBox(90, 0, 10, 10)


def test_hflip_centered_fixed_point():
    assert hflip_box(BBox(45, 5, 10, 10), 100) == BBox(45, 5, 10, 10)


def test_hflip_rejects_out_of_bounds():
    with pytest.raises(ValueError):
        hflip_box(BBox(95, 0, 10, 10), 100)
    with pytest.raises(ValueError):
        hflip_box(BBox(-1, 0, 5, 5), 100)


@given(
    x=st.floats(min_value=0, max_value=900, allow_nan=False),
    y=finite,
    w=st.floats(min_value=0.5, max_value=100, allow_nan=False),
    h=positive,
)
def test_hflip_involution(x, y, w, h):
    width = 1000.0
    b = BBox(x, y, w, h)
    back = hflip_box(hflip_box(b, width), width)
    assert back.x == pytest.approx(b.x, abs=1e-9)
    assert (back.y, back.w, back.h) == (b.y, b.w, b.h)


def test_nms_singleton():
    d = mkdet(1, 0, 0, 10, 10, 0.5)
    assert nms([d], 0.5) == [d]


def test_nms_empty():
    assert nms([], 0.5) == []


def test_nms_duplicate_boxes_keeps_best():
    hi = mkdet(1, 0, 0, 10, 10, 0.9)
    lo = mkdet(1, 0, 0, 10, 10, 0.8)
    # brute-force over subsets: any set containing both violates the pairwise
    # bound, and {lo} leaves a higher-priority conflict outside
    assert nms([lo, hi], 0.5) == [hi]


def test_nms_disjoint_keeps_both():
    a = mkdet(1, 0, 0, 10, 10, 0.9)
    b = mkdet(1, 50, 50, 10, 10, 0.3)
    assert nms([a, b], 0.5) == [a, b]


def test_nms_tie_broken_by_input_index():
    first = mkdet(1, 0, 0, 10, 10, 0.7)
    second = mkdet(1, 1, 0, 10, 10, 0.7)
    assert nms([first, second], 0.5) == [first]
    assert nms([second, first], 0.5) == [second]


def test_nms_output_sorted_and_pairwise_bounded():
    rng = np.random.default_rng(11)
    for _ in range(50):
        dets = [
            mkdet(1, *random_box(rng, span=80).as_tuple(), float(rng.uniform(0, 1)))
            for _ in range(12)
        ]
        out = nms(dets, 0.4)
        scores = [d.score for d in out]
        assert scores == sorted(scores, reverse=True)
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                assert iou(out[i].bbox, out[j].bbox) <= 0.4
        assert all(d in dets for d in out)


def test_nms_matches_exhaustive_oracle():
    rng = np.random.default_rng(23)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        dets = [
            mkdet(1, *random_box(rng, span=40).as_tuple(), float(rng.uniform(0, 1)))
            for _ in range(n)
        ]
        thr = float(rng.uniform(0.1, 0.8))
        expected = nms_oracle([d.bbox.as_tuple() for d in dets], [d.score for d in dets], thr)
        got = {dets.index(d) for d in nms(dets, thr)}
        assert got == expected
