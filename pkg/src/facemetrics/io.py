"""Parsers and writers for annotation, detection, and curve files.

Region-list files follow the FDDB layout: an image-id line, a region
count line, then one region per line.  A region line is classified by
its field count:

* 4 fields: rectangle ``x y w h`` (left-top corner plus size),
* 5 fields: rectangle ``x y w h score``,
* 6 fields: ellipse ``major minor angle cx cy label`` (the axes are
  semi-axis lengths; the trailing label is required but its value is
  not interpreted).

Ellipse angles default to radians, counter-clockwise from the +x axis;
pass ``angle_unit="degrees"`` for files written under the degree
convention.  Parsing is strict: any malformed line raises
:class:`ParseError` with a 1-based line number, and region counts must
match exactly.  Silent recovery would quietly corrupt evaluation
results, so there is none.

Writers are canonical: the same curve (and metadata) always serializes
to byte-identical UTF-8 text with LF newlines, numbers rendered with 6
significant digits.  An infinite threshold (the empty operating point)
is written as ``inf`` in CSV and as the string ``"inf"`` in JSON, which
has no literal for infinities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

from ._version import __version__
from .geometry import Ellipse, Rect
from .matching import Detection, GroundTruth
from .metrics import Curve, CurvePoint, EvalDataset, XSemantics, YSemantics

__all__ = [
    "ParseError",
    "RectRegion",
    "Region",
    "AnnotationEntry",
    "AnnotationFile",
    "CurveDocument",
    "parse_region_list",
    "parse_fold_list",
    "parse_scored_rects",
    "format_rect",
    "build_dataset",
    "write_curve",
    "read_curve",
]


class ParseError(ValueError):
    """Malformed input; ``line`` is the 1-based line the problem was found on."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message


@dataclass(frozen=True, slots=True)
class RectRegion:
    """A rectangle region from a file, with its optional score column."""

    rect: Rect
    score: float | None = None

    def __post_init__(self) -> None:
        if self.score is not None and not math.isfinite(self.score):
            raise ValueError(f"region score must be finite, got {self.score!r}")


Region = Union[RectRegion, Ellipse]


class AnnotationEntry(NamedTuple):
    image_id: str
    regions: tuple[Region, ...]


@dataclass(frozen=True, slots=True)
class AnnotationFile:
    """Ordered per-image region lists; image ids are unique within a file."""

    entries: tuple[AnnotationEntry, ...]

    def __post_init__(self) -> None:
        ids = [entry.image_id for entry in self.entries]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate image ids: {dupes}")


def _parse_floats(tokens: list[str], lineno: int) -> list[float]:
    values = []
    for token in tokens:
        try:
            values.append(float(token))
        except ValueError:
            raise ParseError(f"expected a number, got {token!r}", lineno) from None
    return values


def _parse_region_line(line: str, lineno: int, angle_unit: str) -> Region:
    tokens = line.split()
    if len(tokens) in (4, 5):
        values = _parse_floats(tokens, lineno)
        try:
            rect = Rect.from_xywh(values[0], values[1], values[2], values[3])
            return RectRegion(rect, values[4] if len(tokens) == 5 else None)
        except ValueError as exc:
            raise ParseError(f"invalid rectangle: {exc}", lineno) from None
    if len(tokens) == 6:
        values = _parse_floats(tokens[:5], lineno)
        angle = values[2]
        if angle_unit == "degrees":
            angle = math.radians(angle)
        try:
            return Ellipse(
                center_x=values[3],
                center_y=values[4],
                semi_major=values[0],
                semi_minor=values[1],
                angle=angle,
            )
        except ValueError as exc:
            raise ParseError(f"invalid ellipse: {exc}", lineno) from None
    raise ParseError(
        f"expected 4 fields (rect), 5 (scored rect) or 6 (ellipse), got {len(tokens)}",
        lineno,
    )


def parse_region_list(text: str, *, angle_unit: str = "radians") -> AnnotationFile:
    """Parse an FDDB-style region-list file.

    Blank lines are allowed between records but not inside one.  Raises
    :class:`ParseError` on the first malformed line, undeclared or
    missing regions, or a duplicate image id.
    """
    if angle_unit not in ("radians", "degrees"):
        raise ValueError(f"angle_unit must be 'radians' or 'degrees', got {angle_unit!r}")
    lines = text.splitlines()
    entries = []
    first_seen: dict[str, int] = {}
    pos = 0
    while True:
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            break
        image_id = lines[pos].strip()
        if image_id in first_seen:
            raise ParseError(
                f"duplicate image id {image_id!r} (first seen on line {first_seen[image_id]})",
                pos + 1,
            )
        first_seen[image_id] = pos + 1
        pos += 1
        if pos >= len(lines) or not lines[pos].strip():
            raise ParseError(f"image {image_id!r}: missing region count", pos + 1)
        count_token = lines[pos].strip()
        try:
            count = int(count_token)
        except ValueError:
            raise ParseError(
                f"image {image_id!r}: expected a region count, got {count_token!r}", pos + 1
            ) from None
        if count < 0:
            raise ParseError(f"image {image_id!r}: negative region count {count}", pos + 1)
        pos += 1
        regions = []
        for found in range(count):
            if pos >= len(lines) or not lines[pos].strip():
                raise ParseError(
                    f"image {image_id!r}: declared {count} regions, found {found}", pos + 1
                )
            regions.append(_parse_region_line(lines[pos], pos + 1, angle_unit))
            pos += 1
        entries.append(AnnotationEntry(image_id, tuple(regions)))
    return AnnotationFile(tuple(entries))


def parse_fold_list(text: str) -> list[str]:
    """Image ids from a fold file: one per non-empty line, order preserved."""
    return [line.strip() for line in text.splitlines() if line.strip()]


def parse_scored_rects(text: str) -> list[RectRegion]:
    """Scored rectangles, one ``x y w h score`` line each; blank lines skipped."""
    regions = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        region = _parse_region_line(line, lineno, "radians")
        if isinstance(region, Ellipse) or region.score is None:
            raise ParseError("expected an 'x y w h score' line", lineno)
        regions.append(region)
    return regions


def format_rect(rect: Rect, score: float | None = None) -> str:
    """A rectangle as an ``x y w h [score]`` line body (6 significant digits)."""
    fields = [rect.x_min, rect.y_min, rect.width, rect.height]
    if score is not None:
        fields.append(score)
    return " ".join(_format_number(value) for value in fields)


def build_dataset(annotations: AnnotationFile, detections: AnnotationFile) -> EvalDataset:
    """Join ground-truth and detection files by image id.

    Every annotated image appears in the dataset, with or without
    detections.  Detections for an image missing from the annotations
    are an error, as are detection entries without scores or with
    ellipse regions.
    """
    images: dict[str, tuple[list[Detection], list[GroundTruth]]] = {}
    for entry in annotations.entries:
        gts = []
        for region in entry.regions:
            shape = region if isinstance(region, Ellipse) else region.rect
            gts.append(GroundTruth(region=shape, image_id=entry.image_id))
        images[entry.image_id] = ([], gts)
    for entry in detections.entries:
        if entry.image_id not in images:
            raise ValueError(
                f"detections reference image {entry.image_id!r} absent from the annotations"
            )
        dets = images[entry.image_id][0]
        for region in entry.regions:
            if isinstance(region, Ellipse):
                raise ValueError(
                    f"image {entry.image_id!r}: detections must be rectangles, got an ellipse"
                )
            if region.score is None:
                raise ValueError(
                    f"image {entry.image_id!r}: detection entries must carry scores"
                )
            dets.append(Detection(region=region.rect, score=region.score, image_id=entry.image_id))
    return EvalDataset.from_images(images)


@dataclass(frozen=True, slots=True)
class CurveDocument:
    """A curve plus the run metadata recorded in JSON output."""

    curve: Curve
    dataset_name: str = ""
    matcher: str = ""
    tool_version: str = __version__


def _format_number(value: float) -> str:
    return f"{value:.6g}"


def _json_number(value: float) -> float | str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(_format_number(value))


def _curve_to_csv(curve: Curve) -> str:
    out = [f"# x={curve.x_semantics.value} y={curve.y_semantics.value}", "x,y,threshold"]
    for point in curve.points:
        out.append(
            f"{_format_number(point.x)},{_format_number(point.y)},{_format_number(point.threshold)}"
        )
    return "\n".join(out) + "\n"


def _curve_to_json(document: CurveDocument) -> str:
    payload = {
        "dataset": document.dataset_name,
        "matcher": document.matcher,
        "tool_version": document.tool_version,
        "x_semantics": document.curve.x_semantics.value,
        "y_semantics": document.curve.y_semantics.value,
        "points": [
            [_json_number(p.x), _json_number(p.y), _json_number(p.threshold)]
            for p in document.curve.points
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_curve(
    curve: Curve,
    format: str = "csv",
    *,
    dataset_name: str = "",
    matcher: str = "",
) -> str:
    """Serialize a curve to canonical CSV or JSON text.

    CSV carries a one-line semantics comment; JSON additionally records
    the dataset name, matcher, and tool version.
    """
    if format == "csv":
        return _curve_to_csv(curve)
    if format == "json":
        return _curve_to_json(CurveDocument(curve, dataset_name=dataset_name, matcher=matcher))
    raise ValueError(f"format must be 'csv' or 'json', got {format!r}")


def _semantics(x_name: str, y_name: str, lineno: int) -> tuple[XSemantics, YSemantics]:
    try:
        return XSemantics(x_name), YSemantics(y_name)
    except ValueError:
        raise ParseError(f"unknown curve semantics {x_name!r}/{y_name!r}", lineno) from None


def _build_curve(points: list[CurvePoint], x_sem: XSemantics, y_sem: YSemantics, lineno: int) -> Curve:
    try:
        return Curve(points=tuple(points), x_semantics=x_sem, y_semantics=y_sem)
    except ValueError as exc:
        raise ParseError(f"invalid curve data: {exc}", lineno) from None


def _curve_from_csv(text: str) -> Curve:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ParseError("expected a '# x=... y=...' semantics comment", 1)
    fields = dict(
        token.split("=", 1) for token in lines[0][2:].split() if "=" in token
    )
    if "x" not in fields or "y" not in fields:
        raise ParseError("semantics comment must define x= and y=", 1)
    x_sem, y_sem = _semantics(fields["x"], fields["y"], 1)
    if len(lines) < 2 or lines[1].strip() != "x,y,threshold":
        raise ParseError("expected the header row 'x,y,threshold'", 2)
    points = []
    for offset, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 3:
            raise ParseError(f"expected 3 comma-separated values, got {len(cells)}", offset)
        values = _parse_floats(cells, offset)
        points.append(CurvePoint(*values))
    return _build_curve(points, x_sem, y_sem, 3)


def _curve_from_json(text: str) -> Curve:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(payload, dict):
        raise ParseError("expected a JSON object", 1)
    try:
        x_name = payload["x_semantics"]
        y_name = payload["y_semantics"]
        raw_points = payload["points"]
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r}", 1) from None
    x_sem, y_sem = _semantics(str(x_name), str(y_name), 1)
    points = []
    if not isinstance(raw_points, list):
        raise ParseError("'points' must be a list", 1)
    for raw in raw_points:
        if not isinstance(raw, list) or len(raw) != 3:
            raise ParseError(f"each point must be a 3-element list, got {raw!r}", 1)
        try:
            points.append(CurvePoint(*(float(v) for v in raw)))
        except (TypeError, ValueError):
            raise ParseError(f"non-numeric point {raw!r}", 1) from None
    return _build_curve(points, x_sem, y_sem, 1)


def read_curve(text: str) -> Curve:
    """Parse a curve written by :func:`write_curve` (either format)."""
    if text.lstrip().startswith("{"):
        return _curve_from_json(text)
    return _curve_from_csv(text)
