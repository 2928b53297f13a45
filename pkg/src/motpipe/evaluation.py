"""CLEAR-MOT evaluation: MOTA, false positives, false negatives, id switches.

The per-frame protocol: correspondences from the previous frame are kept
whenever both parties are present and still overlap at IoU >= 0.5, remaining
pairs are matched by minimum-cost assignment on 1 - IoU under the same gate,
unmatched predictions count as false positives, unmatched ground truths as
false negatives, and a matched ground truth whose prediction id differs from
its previously matched id counts one identity switch.

GSI-interpolated boxes are ordinary predictions here; filling a gap is
precisely how interpolation reduces false negatives.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import BBox, iou, iou_matrix
from .mot_io import GtEntry
from .tracker import SequenceResult, solve_assignment

MATCH_IOU = 0.5


@dataclass(frozen=True)
class FrameStats:
    frame: int
    fp: int
    fn: int
    id_switches: int
    matched: int


@dataclass(frozen=True)
class EvalReport:
    mota: float
    fp: int
    fn: int
    id_switches: int
    gt_count: int
    per_frame: tuple[FrameStats, ...]

    @property
    def mota_pct(self) -> float:
        return 100.0 * self.mota


def match_frame(
    gts: list[GtEntry],
    preds: list[tuple[int, BBox]],
    prev_matches: dict[int, int],
) -> tuple[dict[int, int], int, int, int]:
    """Match one frame and return (gt_id -> pred_id, fp, fn, id_switches).

    `prev_matches` carries the last known gt-to-prediction correspondence and
    is not modified; the returned mapping is this frame's correspondence.
    """
    pred_by_id = {pid: box for pid, box in preds}
    matches: dict[int, int] = {}

    # Continuity rule: keep last frame's pairing when it still holds.
    taken: set[int] = set()
    for gt in gts:
        pid = prev_matches.get(gt.track_id)
        if pid is None or pid not in pred_by_id or pid in taken:
            continue
        if iou(gt.bbox, pred_by_id[pid]) >= MATCH_IOU:
            matches[gt.track_id] = pid
            taken.add(pid)

    rem_gts = [g for g in gts if g.track_id not in matches]
    rem_preds = [(pid, box) for pid, box in preds if pid not in taken]
    if rem_gts and rem_preds:
        cost = 1.0 - iou_matrix([g.bbox for g in rem_gts], [b for _, b in rem_preds])
        pairs, _, _ = solve_assignment(cost, 1.0 - MATCH_IOU)
        for gi, pi in pairs:
            matches[rem_gts[gi].track_id] = rem_preds[pi][0]

    id_switches = sum(
        1
        for gid, pid in matches.items()
        if gid in prev_matches and prev_matches[gid] != pid
    )
    fn = len(gts) - len(matches)
    fp = len(preds) - len(matches)
    return matches, fp, fn, id_switches


def evaluate(gt: dict[int, list[GtEntry]], result: SequenceResult) -> EvalReport:
    """Fold the frame matcher over a sequence and aggregate CLEAR-MOT counts."""
    gt_count = sum(len(v) for v in gt.values())
    if gt_count == 0:
        raise ValueError("empty ground truth: MOTA is undefined")
    frames = sorted(set(gt) | set(result.frames))
    prev_matches: dict[int, int] = {}
    total_fp = total_fn = total_ids = 0
    per_frame: list[FrameStats] = []
    for frame in frames:
        gts = gt.get(frame, [])
        preds = [(tid, tb.bbox) for tid, tb in sorted(result.frames.get(frame, {}).items())]
        matches, fp, fn, ids = match_frame(gts, preds, prev_matches)
        prev_matches.update(matches)
        total_fp += fp
        total_fn += fn
        total_ids += ids
        per_frame.append(FrameStats(frame, fp, fn, ids, len(matches)))
    mota = 1.0 - (total_fp + total_fn + total_ids) / gt_count
    return EvalReport(mota, total_fp, total_fn, total_ids, gt_count, tuple(per_frame))
