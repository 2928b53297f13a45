"""Deterministic synthetic scenarios: ground-truth tracks plus corrupted detections.

Three motion families:

* ``constant_velocity``: each track moves on a straight line fitted to stay
  inside the image, one track per horizontal band.
* ``crossing``: tracks are paired; each pair shares a band and swaps sides
  over the sequence, crossing near the middle frame.
* ``occlusion``: slow constant-velocity tracks where one designated track's
  detections are suppressed for a contiguous window and re-emerge with low
  confidence scores for its first frames afterwards, forcing any
  re-association to happen in the tracker's second stage against a lost
  tracklet.

Detections are ground-truth boxes perturbed by zero-mean Gaussian noise,
dropped independently at the configured rate, and scored from a clamped
Gaussian model. All randomness comes from numpy's PCG64 generator seeded from
the config, so outputs are byte-identical across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import IO

import numpy as np

from .geometry import BBox
from .mot_io import Detection, GtEntry, ParseError, parse_key_values

MOTION_FAMILIES = ("constant_velocity", "crossing", "occlusion")

SCORE_MIN = 0.05  # confidence jitter clamp floor; keeps detections alive


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    n_tracks: int = 3
    n_frames: int = 100
    image_width: float = 1280.0
    image_height: float = 720.0
    motion: str = "constant_velocity"
    noise_px: float = 0.0
    dropout_rate: float = 0.0
    score_mean: float = 0.9
    score_jitter: float = 0.0
    seed: int = 0
    # occlusion family only
    occlusion_track: int = 1
    occlusion_start: int = 0  # 0 means mid-sequence
    occlusion_window: int = 10
    reemerge_frames: int = 3
    reemerge_score: float = 0.35

    def __post_init__(self) -> None:
        if self.n_tracks < 1 or self.n_frames < 1:
            raise ScenarioError("n_tracks and n_frames must be positive")
        if self.motion not in MOTION_FAMILIES:
            raise ScenarioError(f"unknown motion family {self.motion!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ScenarioError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.noise_px < 0:
            raise ScenarioError(f"noise_px must be >= 0, got {self.noise_px}")


_INT_KEYS = {
    "n_tracks",
    "n_frames",
    "seed",
    "occlusion_track",
    "occlusion_start",
    "occlusion_window",
    "reemerge_frames",
}
_STR_KEYS = {"motion"}


def load_scenario_config(stream: IO[str]) -> ScenarioConfig:
    """Read a scenario config from flat key=value text."""
    raw = parse_key_values(stream)
    valid = {f.name for f in fields(ScenarioConfig)}
    kwargs: dict[str, object] = {}
    for key, value in raw.items():
        if key not in valid:
            raise ScenarioError(f"unknown scenario key {key!r}")
        if key in _STR_KEYS:
            kwargs[key] = value
        else:
            try:
                kwargs[key] = int(value) if key in _INT_KEYS else float(value)
            except ValueError:
                raise ScenarioError(f"scenario key {key!r} has bad value {value!r}") from None
    return ScenarioConfig(**kwargs)  # type: ignore[arg-type]


def _fit_straight_path(
    rng: np.random.Generator,
    extent: float,
    size: float,
    n_frames: int,
    vmax: float,
    lo: float,
    hi: float,
) -> tuple[float, float]:
    """Pick (start, velocity) so start + v*t stays inside [lo, hi - size]."""
    room = hi - lo - size
    if room < 0:
        raise ScenarioError(
            f"track of size {size:.1f} cannot fit extent [{lo:.1f}, {hi:.1f}]"
        )
    span = n_frames - 1
    v_cap = min(vmax, room / span) if span > 0 else vmax
    v = rng.uniform(-v_cap, v_cap)
    travel = v * span
    start_lo = lo + max(0.0, -travel)
    start_hi = hi - size - max(0.0, travel)
    return float(rng.uniform(start_lo, start_hi)), float(v)


def _band(cfg: ScenarioConfig, index: int, count: int, h: float) -> tuple[float, float]:
    band_h = cfg.image_height / count
    lo = index * band_h
    hi = lo + band_h
    if hi - lo < h:
        raise ScenarioError(
            f"image height {cfg.image_height} too small for {count} tracks of height {h:.1f}"
        )
    return lo, hi


def _make_paths(cfg: ScenarioConfig, rng: np.random.Generator) -> list[list[BBox]]:
    """Per-track box positions for every frame, by motion family."""
    n = cfg.n_tracks
    paths: list[list[BBox]] = []
    if cfg.motion == "crossing":
        for i in range(n):
            w = float(rng.uniform(20, 28))
            h = float(rng.uniform(46, 60))
            pair = i // 2
            lo, hi = _band(cfg, pair, max(1, (n + 1) // 2), h + 14)
            span = min(2.0 * (cfg.n_frames - 1), cfg.image_width - w - 20)
            if span <= 0:
                raise ScenarioError("image too narrow for a crossing pair")
            x_left = (cfg.image_width - span - w) / 2.0
            x_right = x_left + span
            # Even member moves right, odd member moves left; a small vertical
            # offset keeps the pair from coinciding exactly mid-crossing.
            if i % 2 == 0:
                x0, x1 = x_left, x_right
                y = lo + 4.0
            else:
                x0, x1 = x_right, x_left
                y = lo + 4.0 + 0.45 * h
            vx = (x1 - x0) / (cfg.n_frames - 1) if cfg.n_frames > 1 else 0.0
            paths.append(
                [BBox(x0 + vx * t, y, w, h) for t in range(cfg.n_frames)]
            )
        return paths

    slow = cfg.motion == "occlusion"
    for i in range(n):
        w = float(rng.uniform(20, 28))
        h = float(rng.uniform(46, 60))
        lo, hi = _band(cfg, i, n, h)
        vmax_x = 0.35 if slow else 2.0
        vmax_y = 0.0 if slow else 0.6
        x0, vx = _fit_straight_path(rng, cfg.image_width, w, cfg.n_frames, vmax_x, 0.0, cfg.image_width)
        y0, vy = _fit_straight_path(rng, cfg.image_height, h, cfg.n_frames, vmax_y, lo, hi)
        paths.append(
            [BBox(x0 + vx * t, y0 + vy * t, w, h) for t in range(cfg.n_frames)]
        )
    return paths


def _occlusion_bounds(cfg: ScenarioConfig) -> tuple[int, int]:
    start = cfg.occlusion_start
    if start == 0:
        start = max(2, (cfg.n_frames - cfg.occlusion_window) // 2)
    end = start + cfg.occlusion_window - 1
    if cfg.occlusion_window >= cfg.n_frames or end >= cfg.n_frames:
        raise ScenarioError(
            f"occlusion window [{start}, {end}] does not fit {cfg.n_frames} frames"
        )
    return start, end


def generate_scenario(
    cfg: ScenarioConfig,
) -> tuple[dict[int, list[GtEntry]], dict[int, list[Detection]]]:
    """Generate (ground truth, detections) for the configured scenario.

    Deterministic for a fixed seed: the rng is consumed in (frame, track)
    order, one dropout draw per detection opportunity followed by noise and
    score draws for surviving detections.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    paths = _make_paths(cfg, rng)

    occl_first = occl_last = -1
    if cfg.motion == "occlusion":
        if not 1 <= cfg.occlusion_track <= cfg.n_tracks:
            raise ScenarioError(f"occlusion_track {cfg.occlusion_track} out of range")
        occl_first, occl_last = _occlusion_bounds(cfg)

    gt: dict[int, list[GtEntry]] = {}
    dets: dict[int, list[Detection]] = {}
    for frame in range(1, cfg.n_frames + 1):
        gt[frame] = []
        dets[frame] = []
        for tid in range(1, cfg.n_tracks + 1):
            box = paths[tid - 1][frame - 1]
            occluded = (
                cfg.motion == "occlusion"
                and tid == cfg.occlusion_track
                and occl_first <= frame <= occl_last
            )
            gt[frame].append(
                GtEntry(frame, tid, box, True, 0.0 if occluded else 1.0)
            )
            if occluded:
                continue
            if rng.uniform() < cfg.dropout_rate:
                continue
            if cfg.noise_px > 0:
                dx, dy, dw, dh = rng.normal(0.0, cfg.noise_px, 4)
            else:
                dx = dy = dw = dh = 0.0
            noisy = BBox(box.x + dx, box.y + dy, max(box.w + dw, 1.0), max(box.h + dh, 1.0))
            reemerging = (
                cfg.motion == "occlusion"
                and tid == cfg.occlusion_track
                and occl_last < frame <= occl_last + cfg.reemerge_frames
            )
            if reemerging:
                score = cfg.reemerge_score
            elif cfg.score_jitter > 0:
                score = float(np.clip(rng.normal(cfg.score_mean, cfg.score_jitter), SCORE_MIN, 1.0))
            else:
                score = float(np.clip(cfg.score_mean, SCORE_MIN, 1.0))
            dets[frame].append(Detection(frame, noisy, score))
    return gt, dets


def occlusion_scenario(
    cfg: ScenarioConfig,
) -> tuple[dict[int, list[GtEntry]], dict[int, list[Detection]]]:
    """Generate the occlusion stress scenario; requires motion='occlusion'."""
    if cfg.motion != "occlusion":
        raise ScenarioError("occlusion_scenario requires motion='occlusion'")
    return generate_scenario(cfg)


def write_gt(gt: dict[int, list[GtEntry]], sink: IO[str]) -> None:
    """Serialize ground truth in MOTChallenge gt format."""
    for frame in sorted(gt):
        for e in sorted(gt[frame], key=lambda e: e.track_id):
            b = e.bbox
            sink.write(
                f"{e.frame},{e.track_id},{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},"
                f"{1 if e.active else 0},1,{e.visibility:.2f}\n"
            )


def write_detections(dets: dict[int, list[Detection]], sink: IO[str]) -> None:
    """Serialize detections in MOTChallenge det format (id column -1)."""
    for frame in sorted(dets):
        for d in dets[frame]:
            b = d.bbox
            sink.write(
                f"{d.frame},-1,{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},{d.score:.4f},-1,-1,-1\n"
            )
