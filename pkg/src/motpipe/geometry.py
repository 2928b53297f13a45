"""Axis-aligned box arithmetic, overlap measures, and non-maximum suppression."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .mot_io import Detection


@dataclass(frozen=True)
class BBox:
    """Top-left anchored box in original-image pixel coordinates."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box needs positive extent, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 for disjoint boxes, 1 only for identical ones."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def iou_matrix(boxes_a: Sequence[BBox], boxes_b: Sequence[BBox]) -> np.ndarray:
    """Pairwise IoU, shape (len(a), len(b)). Vectorized over the second axis."""
    if not boxes_a or not boxes_b:
        return np.zeros((len(boxes_a), len(boxes_b)))
    a = np.array([b.as_tuple() for b in boxes_a])
    b = np.array([b.as_tuple() for b in boxes_b])
    ax2, ay2 = a[:, 0] + a[:, 2], a[:, 1] + a[:, 3]
    bx2, by2 = b[:, 0] + b[:, 2], b[:, 1] + b[:, 3]
    ix = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / union, 0.0)
    return out


def hflip_box(b: BBox, image_width: float) -> BBox:
    """Mirror a box across the vertical image axis. Involutive for in-bounds boxes."""
    if b.x < 0 or b.x + b.w > image_width:
        raise ValueError(
            f"box [{b.x}, {b.x + b.w}) extends past image width {image_width}"
        )
    return BBox(image_width - b.x - b.w, b.y, b.w, b.h)


def nms(dets: Sequence["Detection"], iou_threshold: float) -> list["Detection"]:
    """Greedy score-descending suppression.

    Ties in score are broken by ascending input index, so the result is
    deterministic. Every surviving pair overlaps by at most `iou_threshold`;
    output is sorted by descending confidence.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: list[int] = []
    for i in order:
        if all(iou(dets[i].bbox, dets[j].bbox) <= iou_threshold for j in kept):
            kept.append(i)
    return [dets[i] for i in kept]
