"""Detection ROC curves and proposal-recall curves.

Curve construction sweeps thresholds over exactly the distinct detection
scores, plus +infinity for the empty operating point, with no binning.
At each threshold the detections at or above it are re-matched from
scratch (IoU values are cached per image, but no match state carries
across thresholds), which keeps every operating point independently
verifiable.

True positives are matched detections; everything else kept at the
threshold is a false positive.  The discrete criterion counts each
match as 1; the continuous criterion weights it by its IoU instead, so
the continuous curve is pointwise at or below the discrete one.  A pair
must clear the matching IoU threshold (default 0.5) before its weight
counts at all; that qualification lives in the matchers' strict
comparison.

Per-image work is independent: curves are reduced from per-image
tallies with an order-fixed merge, so results are identical no matter
how many worker threads run the images.  IoU totals use compensated
summation (``math.fsum``), making them independent of detection input
order as well.  Score ties are broken by input index, so shuffling
detections with *distinct* scores never changes any curve.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, NamedTuple, Sequence, TypeVar

from .matching import (
    Detection,
    GroundTruth,
    greedy_assignment,
    greedy_assignment_by_iou,
    iou_matrix,
    optimal_assignment,
)

__all__ = [
    "XSemantics",
    "YSemantics",
    "CurvePoint",
    "Curve",
    "ImageEntries",
    "EvalDataset",
    "MATCHERS",
    "discrete_roc",
    "continuous_roc",
    "normalized_fp_roc",
    "proposal_recall",
    "curve_query",
]

MATCHERS = ("greedy", "optimal")

_ROC_X = frozenset({"fp_count", "fp_per_image"})


class XSemantics(str, Enum):
    FP_COUNT = "fp_count"
    FP_PER_IMAGE = "fp_per_image"
    IOU_THRESHOLD = "iou_threshold"
    PROPOSAL_COUNT = "proposal_count"


class YSemantics(str, Enum):
    TPR_DISCRETE = "tpr_discrete"
    TPR_CONTINUOUS = "tpr_continuous"
    DETECTION_RATE = "detection_rate"


class CurvePoint(NamedTuple):
    x: float
    y: float
    threshold: float


@dataclass(frozen=True, slots=True)
class Curve:
    """Ordered operating points with axis semantics."""

    points: tuple[CurvePoint, ...]
    x_semantics: XSemantics
    y_semantics: YSemantics

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(CurvePoint(*p) for p in self.points))
        previous = None
        for point in self.points:
            if not 0.0 <= point.y <= 1.0:
                raise ValueError(f"curve y values must be in [0, 1], got {point.y!r}")
            if previous is not None:
                if point.x < previous.x:
                    raise ValueError("curve points must be sorted by ascending x")
                if (
                    self.x_semantics.value in _ROC_X
                    and point.x > previous.x
                    and point.threshold > previous.threshold
                ):
                    raise ValueError("ROC thresholds must be non-increasing along x")
            previous = point


class ImageEntries(NamedTuple):
    detections: tuple[Detection, ...]
    ground_truths: tuple[GroundTruth, ...]


@dataclass(frozen=True, slots=True)
class EvalDataset:
    """Detections and ground truths grouped per image."""

    images: dict[str, ImageEntries]
    total_gt_count: int

    def __post_init__(self) -> None:
        gt_count = 0
        for image_id, entry in self.images.items():
            for det in entry.detections:
                if det.image_id != image_id:
                    raise ValueError(
                        f"detection for image {det.image_id!r} filed under {image_id!r}"
                    )
            for gt in entry.ground_truths:
                if gt.image_id != image_id:
                    raise ValueError(
                        f"ground truth for image {gt.image_id!r} filed under {image_id!r}"
                    )
            gt_count += len(entry.ground_truths)
        if gt_count != self.total_gt_count:
            raise ValueError(
                f"total_gt_count is {self.total_gt_count} but images hold {gt_count}"
            )

    @classmethod
    def from_images(
        cls,
        images: Mapping[str, tuple[Sequence[Detection], Sequence[GroundTruth]]],
    ) -> "EvalDataset":
        built = {
            image_id: ImageEntries(tuple(dets), tuple(gts))
            for image_id, (dets, gts) in images.items()
        }
        total = sum(len(entry.ground_truths) for entry in built.values())
        return cls(images=built, total_gt_count=total)


_T = TypeVar("_T")
_R = TypeVar("_R")


def _ordered_map(fn: Callable[[_T], _R], items: Sequence[_T], threads: int) -> list[_R]:
    """Apply ``fn`` across items, preserving order regardless of thread count."""
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _check_matcher(matcher: str) -> None:
    if matcher not in MATCHERS:
        raise ValueError(f"matcher must be one of {MATCHERS}, got {matcher!r}")


def _check_dataset(ds: EvalDataset) -> None:
    if not ds.images:
        raise ValueError("dataset has no images")
    if ds.total_gt_count <= 0:
        raise ValueError("dataset has no ground truths; curves would be undefined")


def _score_thresholds(ds: EvalDataset) -> list[float]:
    """Distinct scores, descending, preceded by +inf (the empty operating point)."""
    scores = {d.score for entry in ds.images.values() for d in entry.detections}
    return [math.inf] + sorted(scores, reverse=True)


class _Tally(NamedTuple):
    true_positives: int
    iou_sum: float
    false_positives: int


def _image_sweep(
    entry: ImageEntries,
    thresholds: Sequence[float],
    matcher: str,
    iou_threshold: float,
    polygon_vertices: int,
) -> list[_Tally]:
    """Per-image (TP, IoU sum, FP) at every score threshold."""
    dets, gts = entry
    matrix = iou_matrix(dets, gts, polygon_vertices)
    by_score = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    tallies = []
    for threshold in thresholds:
        if matcher == "greedy":
            priority = [i for i in by_score if dets[i].score >= threshold]
            kept_count = len(priority)
            pairs = greedy_assignment(matrix, priority, iou_threshold)
        else:
            kept = [i for i in range(len(dets)) if dets[i].score >= threshold]
            kept_count = len(kept)
            pairs = optimal_assignment([matrix[i] for i in kept], iou_threshold)
        tallies.append(
            _Tally(
                true_positives=len(pairs),
                iou_sum=math.fsum(iou for _, _, iou in pairs),
                false_positives=kept_count - len(pairs),
            )
        )
    return tallies


def _sweep_totals(
    ds: EvalDataset,
    matcher: str,
    iou_threshold: float,
    polygon_vertices: int,
    threads: int,
) -> tuple[list[float], list[_Tally]]:
    thresholds = _score_thresholds(ds)
    per_image = _ordered_map(
        lambda entry: _image_sweep(entry, thresholds, matcher, iou_threshold, polygon_vertices),
        list(ds.images.values()),
        threads,
    )
    totals = []
    for idx in range(len(thresholds)):
        totals.append(
            _Tally(
                true_positives=sum(t[idx].true_positives for t in per_image),
                iou_sum=math.fsum(t[idx].iou_sum for t in per_image),
                false_positives=sum(t[idx].false_positives for t in per_image),
            )
        )
    return thresholds, totals


def _roc_curve(
    ds: EvalDataset,
    matcher: str,
    x_semantics: XSemantics,
    y_semantics: YSemantics,
    iou_threshold: float,
    polygon_vertices: int,
    threads: int,
) -> Curve:
    _check_dataset(ds)
    _check_matcher(matcher)
    thresholds, totals = _sweep_totals(ds, matcher, iou_threshold, polygon_vertices, threads)
    n_images = len(ds.images)
    points = []
    for threshold, tally in zip(thresholds, totals):
        if y_semantics is YSemantics.TPR_CONTINUOUS:
            y = tally.iou_sum / ds.total_gt_count
        else:
            y = tally.true_positives / ds.total_gt_count
        x = float(tally.false_positives)
        if x_semantics is XSemantics.FP_PER_IMAGE:
            x /= n_images
        points.append(CurvePoint(x=x, y=y, threshold=threshold))
    return Curve(points=tuple(points), x_semantics=x_semantics, y_semantics=y_semantics)


def discrete_roc(
    ds: EvalDataset,
    matcher: str = "greedy",
    *,
    iou_threshold: float = 0.5,
    polygon_vertices: int = 1024,
    threads: int = 1,
) -> Curve:
    """ROC over total false-positive count; each match counts as 1."""
    return _roc_curve(
        ds,
        matcher,
        XSemantics.FP_COUNT,
        YSemantics.TPR_DISCRETE,
        iou_threshold,
        polygon_vertices,
        threads,
    )


def continuous_roc(
    ds: EvalDataset,
    matcher: str = "greedy",
    *,
    iou_threshold: float = 0.5,
    polygon_vertices: int = 1024,
    threads: int = 1,
) -> Curve:
    """ROC where each qualifying match contributes its IoU instead of 1."""
    return _roc_curve(
        ds,
        matcher,
        XSemantics.FP_COUNT,
        YSemantics.TPR_CONTINUOUS,
        iou_threshold,
        polygon_vertices,
        threads,
    )


def normalized_fp_roc(
    ds: EvalDataset,
    matcher: str = "greedy",
    *,
    iou_threshold: float = 0.5,
    polygon_vertices: int = 1024,
    threads: int = 1,
) -> Curve:
    """Discrete ROC with false positives divided by the image count."""
    return _roc_curve(
        ds,
        matcher,
        XSemantics.FP_PER_IMAGE,
        YSemantics.TPR_DISCRETE,
        iou_threshold,
        polygon_vertices,
        threads,
    )


def _image_recall_counts(
    entry: ImageEntries,
    n_values: Sequence[int],
    iou_thresholds: Sequence[float],
    polygon_vertices: int,
) -> list[list[int]]:
    """Matched-ground-truth counts per (N, IoU threshold) for one image.

    Proposals are matched once, greedily by descending IoU; a single
    pass then counts the pairs above each threshold.  Because the
    candidates above any threshold form a prefix of the IoU-sorted
    candidate list, this equals re-matching at every threshold.
    """
    dets, gts = entry
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    top_rows = order[: max(n_values)]
    matrix = iou_matrix([dets[i] for i in top_rows], gts, polygon_vertices)
    counts = []
    for n in n_values:
        pairs = greedy_assignment_by_iou(matrix[:n], 0.0)
        ious = [iou for _, _, iou in pairs]
        counts.append([sum(1 for iou in ious if iou > t) for t in iou_thresholds])
    return counts


def proposal_recall(
    ds: EvalDataset,
    n_values: Sequence[int],
    iou_thresholds: Sequence[float],
    *,
    polygon_vertices: int = 1024,
    threads: int = 1,
) -> list[Curve]:
    """Detection rate of the top-N proposals per image, by IoU threshold.

    Returns one curve per entry of ``n_values`` (in the given order);
    each curve's x axis is the IoU threshold.  The denominator is every
    ground truth in the dataset, including those on images without any
    proposal.
    """
    _check_dataset(ds)
    if not n_values:
        raise ValueError("n_values must not be empty")
    if any(n < 0 for n in n_values):
        raise ValueError(f"n_values must be non-negative, got {list(n_values)}")
    if any(not 0.0 < t <= 1.0 for t in iou_thresholds):
        raise ValueError(f"iou_thresholds must lie in (0, 1], got {list(iou_thresholds)}")
    thresholds = sorted(iou_thresholds)
    per_image = _ordered_map(
        lambda entry: _image_recall_counts(entry, n_values, thresholds, polygon_vertices),
        list(ds.images.values()),
        threads,
    )
    curves = []
    for n_idx in range(len(n_values)):
        points = []
        for t_idx, t in enumerate(thresholds):
            matched = sum(counts[n_idx][t_idx] for counts in per_image)
            points.append(CurvePoint(x=t, y=matched / ds.total_gt_count, threshold=t))
        curves.append(
            Curve(
                points=tuple(points),
                x_semantics=XSemantics.IOU_THRESHOLD,
                y_semantics=YSemantics.DETECTION_RATE,
            )
        )
    return curves


def curve_query(curve: Curve, x: float) -> float:
    """Step interpolation: y of the last point with point-x <= x.

    Below the first point the first y is returned.  With several points
    at the same x, the latest (lowest-threshold) one wins.
    """
    if not curve.points:
        raise ValueError("cannot query an empty curve")
    result = curve.points[0].y
    for point in curve.points:
        if point.x <= x:
            result = point.y
        else:
            break
    return result
