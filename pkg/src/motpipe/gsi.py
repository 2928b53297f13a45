"""Gaussian-smoothed interpolation of track gaps.

Two stages per track: internal gaps up to a maximum length are filled by
per-coordinate linear interpolation, then each coordinate channel (x, y, w, h)
is smoothed by Gaussian-process regression against the frame index with an
RBF kernel k(t, t') = exp(-(t - t')^2 / (2 * length_scale^2)).

The GP uses a least-squares linear trend as its mean function and smooths the
residuals: exactly linear trajectories pass through unchanged, the posterior
is translation-equivariant, and isolated jitter is shrunk toward the trend.
Filled boxes keep an interpolated flag so serialization can mark them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import BBox
from .mot_io import INTERPOLATED_CONF, PipelineConfig
from .tracker import SequenceResult, TrackBox

OBSERVATION_NOISE = 1e-2
KERNEL_JITTER = 1e-8


@dataclass(frozen=True)
class SeriesPoint:
    frame: int
    bbox: BBox
    interpolated: bool = False


@dataclass
class TrajectorySeries:
    """One track's observations ordered by strictly increasing frame."""

    track_id: int
    points: list[SeriesPoint]

    def __post_init__(self) -> None:
        frames = [p.frame for p in self.points]
        if any(n <= p for p, n in zip(frames, frames[1:])):
            raise ValueError("series frames must be strictly increasing")


def linear_fill(series: TrajectorySeries, max_gap: int) -> TrajectorySeries:
    """Fill internal gaps of at most `max_gap` missing frames linearly.

    Endpoints are never extrapolated; gaps longer than `max_gap` stay open.
    Series with fewer than two observations are returned unchanged.
    """
    pts = series.points
    if len(pts) < 2:
        return TrajectorySeries(series.track_id, list(pts))
    out: list[SeriesPoint] = [pts[0]]
    for prev, nxt in zip(pts, pts[1:]):
        gap = nxt.frame - prev.frame - 1
        if 1 <= gap <= max_gap:
            a, b = prev.bbox, nxt.bbox
            for f in range(prev.frame + 1, nxt.frame):
                u = (f - prev.frame) / (nxt.frame - prev.frame)
                box = BBox(
                    a.x + u * (b.x - a.x),
                    a.y + u * (b.y - a.y),
                    a.w + u * (b.w - a.w),
                    a.h + u * (b.h - a.h),
                )
                out.append(SeriesPoint(f, box, interpolated=True))
        out.append(nxt)
    return TrajectorySeries(series.track_id, out)


def _smooth_channel(t: np.ndarray, y: np.ndarray, length_scale: float) -> np.ndarray:
    # Linear mean function fitted by least squares; the GP smooths residuals.
    design = np.stack([np.ones_like(t), t], axis=1)
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    trend = design @ beta
    diff = t[:, None] - t[None, :]
    k = np.exp(-(diff**2) / (2.0 * length_scale**2))
    gram = k + (OBSERVATION_NOISE + KERNEL_JITTER) * np.eye(len(t))
    chol = cho_factor(gram, lower=True)
    return trend + k @ cho_solve(chol, y - trend)


def gpr_smooth(series: TrajectorySeries, length_scale: float) -> TrajectorySeries:
    """Smooth each box coordinate with the GP posterior at the observed frames.

    The frame set is unchanged; only box geometry moves. Raises a linear
    algebra error if the kernel matrix is not positive definite after jitter.
    """
    pts = series.points
    if len(pts) < 2:
        return TrajectorySeries(series.track_id, list(pts))
    t = np.array([float(p.frame) for p in pts])
    channels = np.array([[p.bbox.x, p.bbox.y, p.bbox.w, p.bbox.h] for p in pts])
    smoothed = np.column_stack(
        [_smooth_channel(t, channels[:, i], length_scale) for i in range(4)]
    )
    out = []
    for p, (x, y, w, h) in zip(pts, smoothed):
        out.append(replace(p, bbox=BBox(x, y, max(w, 1e-6), max(h, 1e-6))))
    return TrajectorySeries(series.track_id, out)


def result_to_series(result: SequenceResult) -> list[TrajectorySeries]:
    by_id: dict[int, list[SeriesPoint]] = {}
    for frame in sorted(result.frames):
        for tid, tb in result.frames[frame].items():
            by_id.setdefault(tid, []).append(SeriesPoint(frame, tb.bbox, tb.interpolated))
    return [TrajectorySeries(tid, pts) for tid, pts in sorted(by_id.items())]


def apply_gsi(result: SequenceResult, cfg: PipelineConfig) -> SequenceResult:
    """Run linear fill then GP smoothing per track and rebuild the result.

    Tracks with fewer than two observations pass through untouched. No
    observation is ever dropped and ids are preserved; filled boxes carry the
    interpolated flag (serialized as the 0.99 confidence marker).
    """
    frames: dict[int, dict[int, TrackBox]] = {}
    for series in result_to_series(result):
        if len(series.points) >= 2:
            series = gpr_smooth(linear_fill(series, cfg.gsi_max_gap), cfg.gsi_length_scale)
        for p in series.points:
            if p.interpolated:
                score = INTERPOLATED_CONF
            else:
                score = result.frames[p.frame][series.track_id].score
            frames.setdefault(p.frame, {})[series.track_id] = TrackBox(
                p.bbox, score, p.interpolated
            )
    frame_count = max(result.frame_count, max(frames) if frames else 0)
    return SequenceResult(result.name, dict(sorted(frames.items())), frame_count)
