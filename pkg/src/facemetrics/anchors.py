"""Anchor enumeration, box-delta codec, top-N selection, and resize rules.

The anchor family follows the common region-proposal convention: an
anchor is a reference box with a scale (side length whose square is the
box area) and an aspect ratio (height over width), tiled over a feature
grid whose cells are ``stride`` input pixels apart.  The defaults match
the widely used VGG16 setup: scales 128/256/512, ratios 1:1, 1:2 and
2:1 (nine anchors per location) and a stride of 16 pixels.

Anchor centers sit at cell centers, ``(i + 0.5) * stride``; the
alternative corner-origin convention would shift everything by half a
stride.  Anchors are generated unclipped, extending past image bounds
when the grid reaches the border.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Rect

__all__ = [
    "AnchorSpec",
    "BoxDelta",
    "ResizePlan",
    "DEFAULT_ANCHOR_SPEC",
    "base_anchors",
    "anchor_grid",
    "encode",
    "decode",
    "top_n",
    "resize_scale",
]


@dataclass(frozen=True, slots=True)
class AnchorSpec:
    """Anchor family: scales (pixels), height/width ratios, grid stride."""

    scales: tuple[float, ...]
    ratios: tuple[float, ...]
    stride: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if not self.scales:
            raise ValueError("AnchorSpec requires at least one scale")
        if not self.ratios:
            raise ValueError("AnchorSpec requires at least one ratio")
        if any(s <= 0 or not math.isfinite(s) for s in self.scales):
            raise ValueError(f"AnchorSpec scales must be positive, got {self.scales}")
        if any(r <= 0 or not math.isfinite(r) for r in self.ratios):
            raise ValueError(f"AnchorSpec ratios must be positive, got {self.ratios}")
        if self.stride <= 0 or not math.isfinite(self.stride):
            raise ValueError(f"AnchorSpec stride must be positive, got {self.stride}")

    @property
    def anchors_per_location(self) -> int:
        return len(self.scales) * len(self.ratios)


DEFAULT_ANCHOR_SPEC = AnchorSpec(scales=(128.0, 256.0, 512.0), ratios=(1.0, 2.0, 0.5), stride=16.0)


@dataclass(frozen=True, slots=True)
class BoxDelta:
    """Box offsets relative to an anchor: center shifts and log size ratios."""

    tx: float
    ty: float
    tw: float
    th: float

    def __post_init__(self) -> None:
        for name in ("tx", "ty", "tw", "th"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"BoxDelta.{name} must be finite, got {value!r}")


@dataclass(frozen=True, slots=True)
class ResizePlan:
    """Uniform image scale factor and the resulting dimensions."""

    scale: float
    resized_w: float
    resized_h: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"ResizePlan scale must be positive and finite, got {self.scale}")


def base_anchors(spec: AnchorSpec) -> list[Rect]:
    """All scale/ratio combinations as boxes centered at the origin.

    For scale ``s`` and ratio ``r`` the box is ``s / sqrt(r)`` wide and
    ``s * sqrt(r)`` tall, preserving the area ``s**2`` exactly (up to
    float rounding).  Order is scale-major, ratio-minor.
    """
    anchors = []
    for scale in spec.scales:
        for ratio in spec.ratios:
            root = math.sqrt(ratio)
            half_w = 0.5 * scale / root
            half_h = 0.5 * scale * root
            anchors.append(Rect(-half_w, -half_h, half_w, half_h))
    return anchors


def anchor_grid(feature_w: int, feature_h: int, spec: AnchorSpec) -> list[Rect]:
    """Tile the base anchors over a feature grid of the given size.

    Centers are at ``((i + 0.5) * stride, (j + 0.5) * stride)``.  Output
    is row-major: j (rows) outermost, then i, then the anchor index, for
    exactly ``feature_w * feature_h * anchors_per_location`` boxes.
    """
    if feature_w < 1 or feature_h < 1:
        raise ValueError(f"anchor_grid requires a non-empty grid, got {feature_w}x{feature_h}")
    bases = base_anchors(spec)
    grid = []
    for j in range(feature_h):
        cy = (j + 0.5) * spec.stride
        for i in range(feature_w):
            cx = (i + 0.5) * spec.stride
            for base in bases:
                grid.append(
                    Rect(base.x_min + cx, base.y_min + cy, base.x_max + cx, base.y_max + cy)
                )
    return grid


def encode(proposal: Rect, anchor: Rect) -> BoxDelta:
    """Express a proposal as center/log-size offsets from an anchor."""
    pw = proposal.width
    ph = proposal.height
    aw = anchor.width
    ah = anchor.height
    if pw <= 0 or ph <= 0:
        raise ValueError(f"encode requires a positive-size proposal, got {pw}x{ph}")
    if aw <= 0 or ah <= 0:
        raise ValueError(f"encode requires a positive-size anchor, got {aw}x{ah}")
    pcx, pcy = proposal.center
    acx, acy = anchor.center
    return BoxDelta(
        tx=(pcx - acx) / aw,
        ty=(pcy - acy) / ah,
        tw=math.log(pw / aw),
        th=math.log(ph / ah),
    )


def decode(delta: BoxDelta, anchor: Rect) -> Rect:
    """Inverse of :func:`encode`: apply offsets to an anchor."""
    aw = anchor.width
    ah = anchor.height
    if aw <= 0 or ah <= 0:
        raise ValueError(f"decode requires a positive-size anchor, got {aw}x{ah}")
    acx, acy = anchor.center
    cx = acx + delta.tx * aw
    cy = acy + delta.ty * ah
    w = aw * math.exp(delta.tw)
    h = ah * math.exp(delta.th)
    return Rect(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)


def top_n(scored: list[tuple[Rect, float]], n: int) -> list[tuple[Rect, float]]:
    """The ``n`` highest-scoring entries, descending score, ties by input index."""
    if n < 0:
        raise ValueError(f"top_n requires n >= 0, got {n}")
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][1], i))
    return [scored[i] for i in order[:n]]


def resize_scale(width: float, height: float, mode: str) -> ResizePlan:
    """Uniform resize factor for an image of the given size.

    ``train`` scales the longer side to 1024; ``test`` scales the
    shorter side to 600 unless that would push the longer side past
    1024.  The formulas are applied as written, so images smaller than
    the targets are scaled up (no cap at 1.0).
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"resize_scale requires positive dimensions, got {width}x{height}")
    if mode == "train":
        scale = 1024.0 / max(width, height)
    elif mode == "test":
        scale = min(600.0 / min(width, height), 1024.0 / max(width, height))
    else:
        raise ValueError(f"resize_scale mode must be 'train' or 'test', got {mode!r}")
    return ResizePlan(scale=scale, resized_w=scale * width, resized_h=scale * height)
