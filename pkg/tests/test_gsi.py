import numpy as np
import pytest

from motpipe.geometry import BBox
from motpipe.gsi import (
    SeriesPoint,
    TrajectorySeries,
    apply_gsi,
    gpr_smooth,
    linear_fill,
)
from motpipe.mot_io import PipelineConfig
from motpipe.tracker import SequenceResult, TrackBox

from oracles import gp_smooth_oracle


def series(points):
    return TrajectorySeries(1, [SeriesPoint(f, BBox(*b)) for f, b in points])


def boxes_of(s):
    return [(p.frame, p.bbox.as_tuple(), p.interpolated) for p in s.points]


def test_series_rejects_unordered_frames():
    with pytest.raises(ValueError):
        series([(2, (0, 0, 1, 1)), (1, (0, 0, 1, 1))])


def test_linear_fill_midpoint():
    s = series([(1, (0, 0, 10, 10)), (3, (2, 0, 10, 10))])
    out = linear_fill(s, max_gap=5)
    assert boxes_of(out)[1] == (2, (1.0, 0.0, 10.0, 10.0), True)


def test_linear_fill_respects_max_gap():
    s = series([(1, (0, 0, 10, 10)), (7, (6, 0, 10, 10))])  # gap of 5 frames
    assert len(linear_fill(s, max_gap=4).points) == 2
    assert len(linear_fill(s, max_gap=5).points) == 7


def test_linear_fill_identity_when_contiguous():
    s = series([(1, (0, 0, 10, 10)), (2, (1, 0, 10, 10)), (3, (2, 0, 10, 10))])
    assert boxes_of(linear_fill(s, max_gap=3)) == boxes_of(s)


def test_linear_fill_single_observation_unchanged():
    s = series([(4, (0, 0, 10, 10))])
    assert boxes_of(linear_fill(s, max_gap=3)) == boxes_of(s)


def test_linear_fill_never_extrapolates_endpoints():
    s = series([(5, (0, 0, 10, 10)), (6, (1, 0, 10, 10))])
    out = linear_fill(s, max_gap=10)
    assert [p.frame for p in out.points] == [5, 6]


def test_gpr_smooth_linear_trajectory_near_identity():
    pts = [(f, (10.0 + 2.0 * f, 5.0 + 1.0 * f, 20.0, 50.0)) for f in range(1, 31)]
    out = gpr_smooth(series(pts), length_scale=10.0)
    for p, (f, b) in zip(out.points, pts):
        assert np.allclose(p.bbox.as_tuple(), b, atol=0.5)


def test_gpr_smooth_two_points_interpolates():
    s = series([(1, (10, 10, 20, 40)), (2, (30, 12, 20, 40))])
    out = gpr_smooth(s, length_scale=10.0)
    for p, q in zip(out.points, s.points):
        assert np.allclose(p.bbox.as_tuple(), q.bbox.as_tuple(), atol=1e-6)


def test_gpr_smooth_shrinks_outlier_spike():
    pts = [(f, (50.0, 40.0, 20.0, 50.0)) for f in range(1, 31)]
    pts[14] = (15, (55.0, 40.0, 20.0, 50.0))  # 5 px spike in x
    out = gpr_smooth(series(pts), length_scale=10.0)
    assert abs(out.points[14].bbox.x - 50.0) < 5.0


def test_gpr_smooth_matches_dense_oracle():
    rng = np.random.default_rng(6)
    for _ in range(20):
        n = int(rng.integers(2, 40))
        frames = np.sort(rng.choice(np.arange(1, 120), size=n, replace=False))
        xs = 100 + rng.normal(0, 4, n).cumsum()
        ys = 50 + rng.normal(0, 2, n).cumsum()
        ws = np.full(n, 20.0) + rng.normal(0, 0.5, n)
        hs = np.full(n, 50.0) + rng.normal(0, 0.5, n)
        s = TrajectorySeries(
            9,
            [
                SeriesPoint(int(f), BBox(x, y, w, h))
                for f, x, y, w, h in zip(frames, xs, ys, ws, hs)
            ],
        )
        out = gpr_smooth(s, length_scale=10.0)
        t = frames.astype(float)
        for idx, channel in enumerate((xs, ys, ws, hs)):
            expected = gp_smooth_oracle(t, channel, 10.0)
            got = [p.bbox.as_tuple()[idx] for p in out.points]
            assert np.allclose(got, expected, atol=1e-8)


def test_gpr_smooth_translation_equivariance():
    rng = np.random.default_rng(13)
    pts = [
        (f, (100 + 2 * f + float(rng.normal(0, 1)), 50 + float(rng.normal(0, 1)), 20.0, 50.0))
        for f in range(1, 25)
    ]
    base = gpr_smooth(series(pts), length_scale=10.0)
    dx, dy = 37.5, -12.25
    shifted_pts = [(f, (b[0] + dx, b[1] + dy, b[2], b[3])) for f, b in pts]
    shifted = gpr_smooth(series(shifted_pts), length_scale=10.0)
    for a, b in zip(base.points, shifted.points):
        assert b.bbox.x - a.bbox.x == pytest.approx(dx, abs=1e-9)
        assert b.bbox.y - a.bbox.y == pytest.approx(dy, abs=1e-9)
        assert b.bbox.w == pytest.approx(a.bbox.w, abs=1e-9)


def _result_from(points_by_id):
    frames = {}
    for tid, pts in points_by_id.items():
        for f, b in pts:
            frames.setdefault(f, {})[tid] = TrackBox(BBox(*b), 1.0)
    return SequenceResult("s", dict(sorted(frames.items())), max(frames, default=0))


def test_apply_gsi_empty(cfg):
    out = apply_gsi(SequenceResult("s", {}, 0), cfg)
    assert out.frames == {}


def test_apply_gsi_fills_gap_frames(cfg):
    pts = [(f, (10.0 + 2 * f, 20.0, 20.0, 50.0)) for f in list(range(1, 11)) + list(range(13, 21))]
    result = _result_from({1: pts})
    out = apply_gsi(result, cfg)
    assert 11 in out.frames and 12 in out.frames
    assert out.frames[11][1].interpolated and out.frames[12][1].interpolated
    assert out.frames[11][1].score == 0.99


def test_apply_gsi_leaves_long_gaps_open():
    cfg = PipelineConfig(gsi_max_gap=3)
    pts = [(f, (10.0, 20.0, 20.0, 50.0)) for f in list(range(1, 5)) + list(range(10, 14))]
    out = apply_gsi(_result_from({1: pts}), cfg)
    assert all(f not in out.frames for f in range(5, 10))


def test_apply_gsi_never_drops_observations(cfg):
    rng = np.random.default_rng(21)
    frames = sorted(rng.choice(np.arange(1, 60), size=20, replace=False))
    pts = [(int(f), (float(100 + f), 30.0, 20.0, 50.0)) for f in frames]
    result = _result_from({4: pts})
    out = apply_gsi(result, cfg)
    assert set(out.frames) >= {int(f) for f in frames}
    for f in out.frames:
        assert list(out.frames[f]) == [4]
    assert sum(len(r) for r in out.frames.values()) >= len(pts)


def test_apply_gsi_passthrough_short_tracks(cfg):
    result = _result_from({2: [(5, (10.0, 10.0, 20.0, 40.0))]})
    out = apply_gsi(result, cfg)
    assert out.frames[5][2].bbox == BBox(10.0, 10.0, 20.0, 40.0)


def test_apply_gsi_linear_track_roundtrip_error(cfg):
    pts = [(f, (10.0 + 1.5 * f, 20.0 + 0.5 * f, 20.0, 50.0)) for f in range(1, 31)]
    out = apply_gsi(_result_from({1: pts}), cfg)
    for f, b in pts:
        got = out.frames[f][1].bbox.as_tuple()
        assert np.allclose(got, b, atol=0.5)
