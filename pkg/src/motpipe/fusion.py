"""Multi-scale ensemble fusion of detections from three resolution tiers.

The detector is assumed to have run at three input resolutions, each also
horizontally flipped, giving six detection sets per sequence. Fusion maps
flipped predictions back to original coordinates, applies the per-tier size
gates (the low tier may only contribute boxes larger than 32x32, the high
tier only boxes smaller than 96x96, the medium tier is unrestricted), pools
everything per frame, and resolves overlaps with one NMS pass.

Gate areas are compared in original-image coordinates; both gates are strict
inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .geometry import hflip_box, nms
from .mot_io import Detection, PipelineConfig, Tier

FUSION_TIERS = (Tier.LOW, Tier.MEDIUM, Tier.HIGH)


@dataclass
class TierSet:
    """Detections from one (resolution tier, flipped) detector pass."""

    tier: Tier
    flipped: bool
    detections: dict[int, list[Detection]]
    image_width: float

    def __post_init__(self) -> None:
        if self.image_width <= 0:
            raise ValueError(f"image_width must be positive, got {self.image_width}")
        if self.tier not in FUSION_TIERS:
            raise ValueError(f"tier must be low/medium/high, got {self.tier.value}")
        for dets in self.detections.values():
            for d in dets:
                if d.source_tier is not self.tier or d.flipped is not self.flipped:
                    raise ValueError(
                        "detection tags do not match the tier set "
                        f"({d.source_tier.value}/{d.flipped} vs "
                        f"{self.tier.value}/{self.flipped})"
                    )


def deflip(tier_set: TierSet) -> TierSet:
    """Map a flipped tier set back to original coordinates."""
    if not tier_set.flipped:
        raise ValueError("deflip requires a flipped tier set")
    detections = {
        frame: [
            replace(d, bbox=hflip_box(d.bbox, tier_set.image_width), flipped=False)
            for d in dets
        ]
        for frame, dets in tier_set.detections.items()
    }
    return TierSet(tier_set.tier, False, detections, tier_set.image_width)


def scale_gate(d: Detection, cfg: PipelineConfig) -> bool:
    """Admit or reject a detection based on its tier's box-size gate."""
    if d.source_tier is Tier.LOW:
        return d.bbox.area > cfg.gate_small_area
    if d.source_tier is Tier.HIGH:
        return d.bbox.area < cfg.gate_large_area
    if d.source_tier is Tier.MEDIUM:
        return True
    raise ValueError("fusion requires tier-tagged detections; got unspecified tier")


def fuse_multiscale(
    sets: list[TierSet], cfg: PipelineConfig
) -> dict[int, list[Detection]]:
    """Fuse the six (tier, flipped) detection sets into one set per frame.

    The output is invariant to the order the sets are supplied in: pooling
    happens in a canonical (tier, flipped) order before the deterministic NMS
    pass. Output detections lose their tier and flip tags.
    """
    combos = [(s.tier, s.flipped) for s in sets]
    expected = [(t, f) for t in FUSION_TIERS for f in (False, True)]
    for combo in combos:
        if combos.count(combo) > 1:
            raise ValueError(f"duplicate tier set {combo[0].value}/{'flip' if combo[1] else 'orig'}")
    missing = [c for c in expected if c not in combos]
    if missing:
        names = ", ".join(f"{t.value}/{'flip' if f else 'orig'}" for t, f in missing)
        raise ValueError(f"missing tier sets: {names}")
    widths = {s.image_width for s in sets}
    if len(widths) > 1:
        raise ValueError(f"inconsistent image widths across tier sets: {sorted(widths)}")

    canonical = sorted(sets, key=lambda s: (FUSION_TIERS.index(s.tier), s.flipped))
    pooled: dict[int, list[Detection]] = {}
    for tier_set in canonical:
        if tier_set.flipped:
            tier_set = deflip(tier_set)
        for frame, dets in sorted(tier_set.detections.items()):
            keep = [d for d in dets if scale_gate(d, cfg)]
            pooled.setdefault(frame, []).extend(keep)

    fused: dict[int, list[Detection]] = {}
    for frame in sorted(pooled):
        survivors = nms(pooled[frame], cfg.nms_iou)
        fused[frame] = [
            replace(d, source_tier=Tier.UNSPECIFIED, flipped=False) for d in survivors
        ]
    return fused
