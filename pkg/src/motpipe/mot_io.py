"""MOTChallenge-format file parsing and writing, plus pipeline configuration.

File formats handled here:

* detections: ``frame,id,x,y,w,h,conf[,x3d,y3d,z3d]`` (id ignored on input)
* ground truth: ``frame,id,x,y,w,h,active,class,visibility``
* results: ``frame,id,x,y,w,h,conf,-1,-1,-1`` with LF endings, no header
* config: flat ``key=value`` lines, ``#`` comments allowed

All parsers raise :class:`ParseError` with the offending line number; they
never escape with anything else on malformed text.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, fields, replace
from typing import IO, TYPE_CHECKING

from .geometry import BBox

if TYPE_CHECKING:
    from .tracker import SequenceResult

log = logging.getLogger(__name__)

PEDESTRIAN_CLASS = 1
# MOTChallenge label ids; anything outside is treated as unknown and skipped.
KNOWN_CLASSES = frozenset(range(1, 13))

# Confidence markers used when serializing results, so box provenance
# (tracked vs GSI-interpolated) survives a write/parse round trip.
TRACKED_CONF = 1.0
INTERPOLATED_CONF = 0.99


class ParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ConfigError(ValueError):
    pass


class Tier(enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    UNSPECIFIED = "unspecified"


@dataclass(frozen=True)
class Detection:
    """One candidate box in one frame."""

    frame: int
    bbox: BBox
    score: float
    source_tier: Tier = Tier.UNSPECIFIED
    flipped: bool = False

    def __post_init__(self) -> None:
        if self.frame < 1:
            raise ValueError(f"frame must be >= 1, got {self.frame}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class GtEntry:
    """One ground-truth box; only active pedestrian entries feed evaluation."""

    frame: int
    track_id: int
    bbox: BBox
    active: bool
    visibility: float


@dataclass(frozen=True)
class PipelineConfig:
    """Tracker and post-processing knobs with ByteTrack/StrongSORT-style defaults.

    The two gate areas are 32*32 and 96*96 in original-image pixels; the rest
    follow the conventions of the tracker lineage this pipeline builds on.
    """

    det_high_thresh: float = 0.6
    det_low_thresh: float = 0.1
    new_track_thresh: float = 0.7
    match_thresh_stage1: float = 0.8
    match_thresh_stage2: float = 0.5
    max_lost_age: int = 30
    nms_iou: float = 0.7
    gate_small_area: float = 1024.0
    gate_large_area: float = 9216.0
    gsi_max_gap: int = 20
    gsi_length_scale: float = 10.0
    min_box_area: float = 100.0

    def __post_init__(self) -> None:
        for key in (
            "det_high_thresh",
            "det_low_thresh",
            "new_track_thresh",
            "match_thresh_stage1",
            "match_thresh_stage2",
            "nms_iou",
        ):
            v = getattr(self, key)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{key} must be in [0, 1], got {v}")
        if self.det_low_thresh >= self.det_high_thresh:
            raise ConfigError(
                "det_low_thresh must be strictly below det_high_thresh "
                f"(got det_low_thresh={self.det_low_thresh}, "
                f"det_high_thresh={self.det_high_thresh})"
            )
        for key in (
            "max_lost_age",
            "gate_small_area",
            "gate_large_area",
            "gsi_max_gap",
            "gsi_length_scale",
            "min_box_area",
        ):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")


def _split_line(line: str, lineno: int, min_fields: int) -> list[str]:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) < min_fields:
        raise ParseError(lineno, f"expected at least {min_fields} fields, got {len(parts)}")
    return parts


def _parse_float(value: str, lineno: int, name: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ParseError(lineno, f"{name} is not a number: {value!r}") from None
    if out != out or out in (float("inf"), float("-inf")):
        raise ParseError(lineno, f"{name} is not finite: {value!r}")
    return out


def _parse_int(value: str, lineno: int, name: str) -> int:
    try:
        return int(float(value))
    except (ValueError, OverflowError):
        raise ParseError(lineno, f"{name} is not an integer: {value!r}") from None


def _parse_box(parts: list[str], lineno: int) -> BBox:
    x = _parse_float(parts[2], lineno, "x")
    y = _parse_float(parts[3], lineno, "y")
    w = _parse_float(parts[4], lineno, "w")
    h = _parse_float(parts[5], lineno, "h")
    if w <= 0:
        raise ParseError(lineno, f"non-positive width {w}")
    if h <= 0:
        raise ParseError(lineno, f"non-positive height {h}")
    return BBox(x, y, w, h)


def parse_detections(
    stream: IO[str],
    source_tier: Tier = Tier.UNSPECIFIED,
    flipped: bool = False,
) -> dict[int, list[Detection]]:
    """Parse a MOTChallenge detection file into a frame-keyed map.

    The id column is ignored. Frame keys iterate in ascending order. Optional
    `source_tier`/`flipped` tags are applied to every parsed detection (used
    when loading per-resolution files for ensemble fusion).
    """
    by_frame: dict[int, list[Detection]] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = _split_line(line, lineno, 7)
        frame = _parse_int(parts[0], lineno, "frame")
        if frame < 1:
            raise ParseError(lineno, f"frame must be >= 1, got {frame}")
        bbox = _parse_box(parts, lineno)
        score = _parse_float(parts[6], lineno, "conf")
        if not 0.0 <= score <= 1.0:
            raise ParseError(lineno, f"conf must be in [0, 1], got {score}")
        det = Detection(frame, bbox, score, source_tier, flipped)
        by_frame.setdefault(frame, []).append(det)
    return dict(sorted(by_frame.items()))


def parse_ground_truth(stream: IO[str]) -> dict[int, list[GtEntry]]:
    """Parse a MOTChallenge gt file, keeping active pedestrian entries only.

    Duplicate (frame, id) pairs are an error. Entries with an unknown class
    value are skipped; the skip count is logged as a single warning.
    """
    by_frame: dict[int, list[GtEntry]] = {}
    seen: set[tuple[int, int]] = set()
    unknown_class = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = _split_line(line, lineno, 9)
        frame = _parse_int(parts[0], lineno, "frame")
        track_id = _parse_int(parts[1], lineno, "id")
        if frame < 1 or track_id < 1:
            raise ParseError(lineno, f"frame and id must be >= 1, got {frame},{track_id}")
        key = (frame, track_id)
        if key in seen:
            raise ParseError(lineno, f"duplicate (frame, id) pair {key}")
        seen.add(key)
        bbox = _parse_box(parts, lineno)
        active = _parse_int(parts[6], lineno, "active") != 0
        cls = _parse_int(parts[7], lineno, "class")
        visibility = _parse_float(parts[8], lineno, "visibility")
        if cls not in KNOWN_CLASSES:
            unknown_class += 1
            continue
        if not active or cls != PEDESTRIAN_CLASS:
            continue
        by_frame.setdefault(frame, []).append(
            GtEntry(frame, track_id, bbox, active, visibility)
        )
    if unknown_class:
        log.warning("skipped %d gt entries with unknown class values", unknown_class)
    return dict(sorted(by_frame.items()))


def write_results(result: "SequenceResult", sink: IO[str]) -> None:
    """Emit a result file, ordered by frame then id, coordinates at 2 decimals.

    Tracked boxes are written with confidence 1.00 and GSI-interpolated boxes
    with 0.99, so interpolation provenance survives serialization.
    """
    for frame in sorted(result.frames):
        boxes = result.frames[frame]
        for tid in sorted(boxes):
            tb = boxes[tid]
            if tid < 1:
                raise ValueError(f"track ids must be positive, got {tid}")
            conf = INTERPOLATED_CONF if tb.interpolated else TRACKED_CONF
            b = tb.bbox
            sink.write(
                f"{frame},{tid},{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},{conf:.2f},-1,-1,-1\n"
            )


def parse_results(stream: IO[str], name: str = "") -> "SequenceResult":
    """Parse a result file back into a SequenceResult.

    Unlike `parse_detections` the id column is kept. A confidence equal to the
    0.99 interpolation marker restores the interpolated flag.
    """
    from .tracker import SequenceResult, TrackBox

    frames: dict[int, dict[int, TrackBox]] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = _split_line(line, lineno, 7)
        frame = _parse_int(parts[0], lineno, "frame")
        tid = _parse_int(parts[1], lineno, "id")
        if frame < 1:
            raise ParseError(lineno, f"frame must be >= 1, got {frame}")
        if tid < 1:
            raise ParseError(lineno, f"track id must be >= 1, got {tid}")
        bbox = _parse_box(parts, lineno)
        conf = _parse_float(parts[6], lineno, "conf")
        per_frame = frames.setdefault(frame, {})
        if tid in per_frame:
            raise ParseError(lineno, f"duplicate (frame, id) pair ({frame}, {tid})")
        interpolated = abs(conf - INTERPOLATED_CONF) < 1e-9
        per_frame[tid] = TrackBox(bbox, conf, interpolated)
    frame_count = max(frames) if frames else 0
    return SequenceResult(name=name, frames=dict(sorted(frames.items())), frame_count=frame_count)


_INT_CONFIG_KEYS = {"max_lost_age", "gsi_max_gap"}


def parse_key_values(stream: IO[str]) -> dict[str, str]:
    """Read flat ``key=value`` text; '#' starts a comment, blank lines skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ParseError(lineno, "empty key")
        if key in out:
            raise ParseError(lineno, f"duplicate key {key!r}")
        out[key] = value
    return out


def load_config(stream: IO[str]) -> PipelineConfig:
    """Build a PipelineConfig from key=value text; unknown keys are rejected."""
    raw = parse_key_values(stream)
    valid = {f.name for f in fields(PipelineConfig)}
    kwargs: dict[str, float | int] = {}
    for key, value in raw.items():
        if key not in valid:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kwargs[key] = int(value) if key in _INT_CONFIG_KEYS else float(value)
        except ValueError:
            raise ConfigError(f"config key {key!r} has non-numeric value {value!r}") from None
    return PipelineConfig(**kwargs)


def config_as_dict(cfg: PipelineConfig) -> dict[str, float | int]:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def retag(det: Detection, source_tier: Tier, flipped: bool) -> Detection:
    return replace(det, source_tier=source_tier, flipped=flipped)
