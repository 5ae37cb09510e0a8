"""Overlap computations between rectangles and ellipses, plus NMS.

Conventions used throughout the package:

* Coordinates live in a continuous plane.  A box covers the open region
  between its corners, so its width is ``x_max - x_min`` with no
  integer-pixel "+1" adjustment.  State this when comparing numbers
  against tools that use the legacy pixel convention (e.g. some FDDB
  evaluation scripts).
* Ellipse angles are radians, measured counter-clockwise from the +x
  axis to the major axis.
* Degenerate (zero-area) regions never overlap anything: their IoU with
  any region is defined as 0.
* All functions are pure and all region types are immutable, so callers
  may evaluate them concurrently without locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:  # only for annotations; Detection lives in matching
    from .matching import Detection

__all__ = [
    "Rect",
    "Ellipse",
    "Polygon",
    "area",
    "iou_rect",
    "ellipse_to_polygon",
    "iou_ellipse_rect",
    "bounding_rect",
    "clip_polygon_to_rect",
    "nms",
]


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned rectangle with min/max corners."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        for name in ("x_min", "y_min", "x_max", "y_max"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"Rect.{name} must be finite, got {value!r}")
        if self.x_max < self.x_min:
            raise ValueError(f"Rect requires x_max >= x_min, got {self.x_min}..{self.x_max}")
        if self.y_max < self.y_min:
            raise ValueError(f"Rect requires y_max >= y_min, got {self.y_min}..{self.y_max}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    @classmethod
    def from_xywh(cls, x: float, y: float, width: float, height: float) -> "Rect":
        """Build from left-top corner plus size (the detection-file layout)."""
        return cls(x, y, x + width, y + height)


@dataclass(frozen=True, slots=True)
class Ellipse:
    """Rotated ellipse; ``angle`` is radians CCW from +x to the major axis."""

    center_x: float
    center_y: float
    semi_major: float
    semi_minor: float
    angle: float

    def __post_init__(self) -> None:
        for name in ("center_x", "center_y", "semi_major", "semi_minor", "angle"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"Ellipse.{name} must be finite, got {value!r}")
        if self.semi_minor <= 0:
            raise ValueError(f"Ellipse requires semi_minor > 0, got {self.semi_minor}")
        if self.semi_major < self.semi_minor:
            raise ValueError(
                "Ellipse requires semi_major >= semi_minor, got "
                f"{self.semi_major} < {self.semi_minor}"
            )

    @property
    def area(self) -> float:
        return math.pi * self.semi_major * self.semi_minor


@dataclass(frozen=True, slots=True)
class Polygon:
    """Simple polygon with counter-clockwise vertices.

    Simplicity is not re-checked; every constructor in this module emits
    non-self-intersecting vertex lists by construction.
    """

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise ValueError(f"Polygon requires >= 3 vertices, got {len(self.vertices)}")
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices))

    @property
    def area(self) -> float:
        return abs(_signed_area(self.vertices))


def _signed_area(vertices: Sequence[tuple[float, float]]) -> float:
    """Shoelace formula; positive for counter-clockwise vertex order."""
    total = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return 0.5 * total


def area(rect: Rect) -> float:
    """Area of a rectangle (0 for degenerate rects)."""
    return rect.width * rect.height


def iou_rect(a: Rect, b: Rect) -> float:
    """Intersection-over-union of two rectangles, in [0, 1].

    Returns 0 when the union has zero area, so degenerate rectangles
    never match anything.
    """
    inter_w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    inter_h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    inter = inter_w * inter_h
    union = area(a) + area(b) - inter
    if union <= 0:
        return 0.0
    return inter / union


def ellipse_to_polygon(ellipse: Ellipse, n: int) -> Polygon:
    """Inscribe an ``n``-gon in the ellipse at uniform parameter angles.

    The polygon area converges to pi * semi_major * semi_minor as ``n``
    grows; at n=1024 the relative deficit is below 1e-5.
    """
    if n < 8:
        raise ValueError(f"ellipse_to_polygon requires n >= 8, got {n}")
    cos_t = math.cos(ellipse.angle)
    sin_t = math.sin(ellipse.angle)
    vertices = []
    for k in range(n):
        t = 2.0 * math.pi * k / n
        px = ellipse.semi_major * math.cos(t)
        py = ellipse.semi_minor * math.sin(t)
        vertices.append(
            (
                ellipse.center_x + px * cos_t - py * sin_t,
                ellipse.center_y + px * sin_t + py * cos_t,
            )
        )
    return Polygon(tuple(vertices))


def clip_polygon_to_rect(vertices: Sequence[tuple[float, float]], rect: Rect) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a polygon against an axis-aligned rect.

    Returns the clipped vertex list (counter-clockwise, possibly empty).
    The subject polygon must be convex or at least simple; the output of
    clipping a convex polygon stays convex.
    """
    # Each pass keeps the half-plane on the inner side of one rect edge.
    passes = (
        (0, rect.x_min, 1.0),   # x >= x_min
        (0, rect.x_max, -1.0),  # x <= x_max
        (1, rect.y_min, 1.0),   # y >= y_min
        (1, rect.y_max, -1.0),  # y <= y_max
    )
    output = list(vertices)
    for axis, bound, sign in passes:
        if not output:
            return []
        polygon = output
        output = []
        prev = polygon[-1]
        prev_inside = sign * (prev[axis] - bound) >= 0
        for current in polygon:
            cur_inside = sign * (current[axis] - bound) >= 0
            if cur_inside != prev_inside:
                # Edge crosses the boundary; denominator is nonzero here
                # because the endpoints sit on opposite sides.
                t = (bound - prev[axis]) / (current[axis] - prev[axis])
                crossing = (
                    prev[0] + t * (current[0] - prev[0]),
                    prev[1] + t * (current[1] - prev[1]),
                )
                output.append(crossing)
            if cur_inside:
                output.append(current)
            prev = current
            prev_inside = cur_inside
    return output


def iou_ellipse_rect(ellipse: Ellipse, rect: Rect, n: int = 1024) -> float:
    """IoU between an ellipse and a rectangle via polygon clipping.

    The ellipse is approximated by an inscribed ``n``-gon and clipped
    against the rectangle; the ellipse's own area uses the exact
    pi * a * b value.  At the default n=1024 the approximation error is
    far below the 5e-3 level that matters for matching decisions.
    """
    rect_area = area(rect)
    if rect_area <= 0:
        return 0.0
    polygon = ellipse_to_polygon(ellipse, n)
    clipped = clip_polygon_to_rect(polygon.vertices, rect)
    if len(clipped) < 3:
        return 0.0
    inter = abs(_signed_area(clipped))
    union = ellipse.area + rect_area - inter
    if union <= 0:
        return 0.0
    iou = inter / union
    # Mixed exact/polygonal areas can nudge the ratio past the ideal
    # bounds by float error only.
    return min(max(iou, 0.0), 1.0)


def bounding_rect(ellipse: Ellipse) -> Rect:
    """Tight axis-aligned bounds of a rotated ellipse."""
    a = ellipse.semi_major
    b = ellipse.semi_minor
    cos_t = math.cos(ellipse.angle)
    sin_t = math.sin(ellipse.angle)
    half_w = math.sqrt((a * cos_t) ** 2 + (b * sin_t) ** 2)
    half_h = math.sqrt((a * sin_t) ** 2 + (b * cos_t) ** 2)
    return Rect(
        ellipse.center_x - half_w,
        ellipse.center_y - half_h,
        ellipse.center_x + half_w,
        ellipse.center_y + half_h,
    )


def nms(dets: Sequence["Detection"], iou_threshold: float) -> list["Detection"]:
    """Greedy non-maximum suppression over one pool of detections.

    Detections are visited in descending score (ties by input index); a
    detection is dropped when its IoU with an already-kept detection
    exceeds ``iou_threshold``.  The strict comparison means boxes with
    zero overlap survive any threshold, including 0.  Image identifiers
    are ignored: pass one image's detections at a time.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: list[int] = []
    for i in order:
        if all(iou_rect(dets[i].region, dets[j].region) <= iou_threshold for j in kept):
            kept.append(i)
    return [dets[i] for i in kept]
