"""Two-stage confidence-split association and track lifecycle management.

Per frame, detections are split by confidence. Stage 1 associates high
confidence detections with every live tracklet (tracked, lost, and one-frame
tentative ones). Stage 2 associates the leftover low confidence detections
with the tracklets still unmatched, and deliberately keeps LOST tracklets in
the candidate pool: a briefly occluded pedestrian that re-emerges with a low
detection score can be recovered here instead of fragmenting into a new id.
The ablation flag `lost_in_stage2=False` restores the conventional behaviour
that restricts stage 2 to tracklets that were in the tracked state.

Association cost is 1 - IoU between the predicted box and the detection box.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kalman
from .geometry import BBox, iou_matrix
from .mot_io import Detection, PipelineConfig


class TrackState(enum.Enum):
    TENTATIVE = "tentative"
    TRACKED = "tracked"
    LOST = "lost"
    REMOVED = "removed"


@dataclass
class Track:
    """One identity with lifecycle state, motion state, and box history."""

    id: int
    state: TrackState
    kstate: kalman.KalmanState
    last_frame: int
    frames_lost: int = 0
    history: list[tuple[int, BBox, float]] = field(default_factory=list)

    @property
    def predicted_box(self) -> BBox:
        return kalman.state_to_bbox(self.kstate)


@dataclass(frozen=True)
class TrackBox:
    """One reported box: geometry, score, and interpolation provenance."""

    bbox: BBox
    score: float
    interpolated: bool = False


@dataclass
class SequenceResult:
    """Per-frame map of track id to reported box for one sequence."""

    name: str
    frames: dict[int, dict[int, TrackBox]]
    frame_count: int

    def total_boxes(self) -> int:
        return sum(len(v) for v in self.frames.values())


def solve_assignment(
    cost: np.ndarray, gate: float
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Optimal gated assignment on a dense cost matrix.

    Only entries with cost <= gate are matchable. Among gated matchings the
    solver maximizes cardinality first, then minimizes total cost (a matching
    of fewer pairs is never preferred, so the trivial empty matching is not
    an answer). Returns (matches, unmatched_rows, unmatched_cols).
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        n_rows = cost.shape[0] if cost.ndim == 2 else 0
        n_cols = cost.shape[1] if cost.ndim == 2 else 0
        return [], list(range(n_rows)), list(range(n_cols))
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix must be finite")
    n_rows, n_cols = cost.shape
    allowed = cost <= gate
    if not allowed.any():
        return [], list(range(n_rows)), list(range(n_cols))
    # Forbidden entries get a penalty large enough that the solver always
    # prefers one more allowed pair over any cost rearrangement.
    big = (np.abs(cost[allowed]).max() + 1.0) * (min(n_rows, n_cols) + 1) * 2.0
    padded = np.where(allowed, cost, big)
    rows, cols = linear_sum_assignment(padded)
    matches = [(int(r), int(c)) for r, c in zip(rows, cols) if allowed[r, c]]
    matched_rows = {r for r, _ in matches}
    matched_cols = {c for _, c in matches}
    unmatched_rows = [r for r in range(n_rows) if r not in matched_rows]
    unmatched_cols = [c for c in range(n_cols) if c not in matched_cols]
    return matches, unmatched_rows, unmatched_cols


def _associate(
    tracks: list[Track], dets: list[Detection], gate: float
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Gated min-cost matching between predicted track boxes and detections."""
    if not tracks or not dets:
        return [], list(range(len(tracks))), list(range(len(dets)))
    cost = 1.0 - iou_matrix([t.predicted_box for t in tracks], [d.bbox for d in dets])
    return solve_assignment(cost, gate)


def _match_track(track: Track, det: Detection, frame: int) -> None:
    track.kstate = kalman.update_nsa(track.kstate, det.bbox, det.score)
    track.state = TrackState.TRACKED
    track.frames_lost = 0
    track.last_frame = frame
    track.history.append((frame, kalman.state_to_bbox(track.kstate), det.score))


def step_frame(
    tracks: list[Track],
    dets: Sequence[Detection],
    cfg: PipelineConfig,
    frame: int,
    *,
    lost_in_stage2: bool = True,
    first_frame: bool = False,
    id_source: Iterator[int] | None = None,
) -> list[Track]:
    """Advance all tracks one frame against this frame's detections.

    Tracks are mutated in place; the returned list additionally contains any
    newly spawned tracks. The full list (removed tracks included) must be fed
    back on the next call so ids are never reused.
    """
    for d in dets:
        if d.frame != frame:
            raise ValueError(f"detection for frame {d.frame} fed to step_frame({frame})")
    if id_source is None:
        id_source = itertools.count(max((t.id for t in tracks), default=0) + 1)

    live = [t for t in tracks if t.state is not TrackState.REMOVED]
    for t in live:
        t.kstate = kalman.predict(t.kstate)

    high = [d for d in dets if d.score >= cfg.det_high_thresh]
    low = [d for d in dets if cfg.det_low_thresh <= d.score < cfg.det_high_thresh]

    # Stage 1: high confidence detections vs every live tracklet,
    # lost ones included.
    stage1_tracks = live
    matches, um_tracks, um_dets = _associate(stage1_tracks, high, cfg.match_thresh_stage1)
    for ti, di in matches:
        _match_track(stage1_tracks[ti], high[di], frame)

    leftovers = [stage1_tracks[i] for i in um_tracks]

    # Stage 2: low confidence detections vs the remaining tracklets. Lost
    # tracklets stay eligible here unless the ablation variant is requested;
    # tentative tracks only ever participate in stage 1.
    if lost_in_stage2:
        stage2_tracks = [
            t for t in leftovers if t.state in (TrackState.TRACKED, TrackState.LOST)
        ]
    else:
        stage2_tracks = [t for t in leftovers if t.state is TrackState.TRACKED]
    matches2, um_tracks2, _ = _associate(stage2_tracks, low, cfg.match_thresh_stage2)
    for ti, di in matches2:
        _match_track(stage2_tracks[ti], low[di], frame)

    # Lifecycle for everything that stayed unmatched.
    matched2 = {id(stage2_tracks[ti]) for ti, _ in matches2}
    for t in leftovers:
        if id(t) in matched2:
            continue
        if t.state is TrackState.TENTATIVE:
            t.state = TrackState.REMOVED
        else:
            t.state = TrackState.LOST
            t.frames_lost += 1
            if t.frames_lost > cfg.max_lost_age:
                t.state = TrackState.REMOVED

    # Births: only unmatched high detections above the spawn threshold.
    # On the first frame of a sequence new tracks are confirmed immediately;
    # later ones must be matched again next frame to shed tentative status.
    for di in um_dets:
        det = high[di]
        if det.score < cfg.new_track_thresh:
            continue
        state = TrackState.TRACKED if first_frame else TrackState.TENTATIVE
        t = Track(
            id=next(id_source),
            state=state,
            kstate=kalman.init_state(det.bbox),
            last_frame=frame,
        )
        t.history.append((frame, det.bbox, det.score))
        tracks.append(t)
    return tracks


def run_sequence(
    dets_by_frame: dict[int, list[Detection]],
    cfg: PipelineConfig,
    name: str = "",
    *,
    lost_in_stage2: bool = True,
) -> SequenceResult:
    """Track a whole sequence and collect per-frame boxes of tracked identities.

    Frames between the first and last detection key are processed even when
    empty. Only frames where a track is in the tracked state contribute boxes,
    and boxes below the minimum area are not reported.
    """
    if not dets_by_frame:
        return SequenceResult(name=name, frames={}, frame_count=0)
    first, last = min(dets_by_frame), max(dets_by_frame)
    tracks: list[Track] = []
    frames: dict[int, dict[int, TrackBox]] = {}
    id_source = itertools.count(1)
    for frame in range(first, last + 1):
        dets = dets_by_frame.get(frame, [])
        tracks = step_frame(
            tracks,
            dets,
            cfg,
            frame,
            lost_in_stage2=lost_in_stage2,
            first_frame=(frame == first),
            id_source=id_source,
        )
        reported: dict[int, TrackBox] = {}
        for t in tracks:
            if t.state is not TrackState.TRACKED or t.last_frame != frame:
                continue
            _, box, score = t.history[-1]
            if box.area < cfg.min_box_area:
                continue
            reported[t.id] = TrackBox(box, score)
        if reported:
            frames[frame] = reported
    return SequenceResult(name=name, frames=frames, frame_count=last - first + 1)
