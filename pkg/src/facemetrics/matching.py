"""One-to-one assignment of detections to ground-truth regions.

Two matchers are provided.  ``match_greedy`` visits detections in
descending score order and lets each claim the best still-unclaimed
ground truth; it is cheap, order-stable, and the default everywhere.
``match_optimal`` maximizes the total IoU over all admissible pairs via
an exact assignment solve; it is the better choice when detections
overlap several ground truths and greedy order would steal the wrong
one.

A pair is admissible when its IoU is strictly greater than the
threshold.  The strict comparison is applied uniformly at every
threshold (a detection at IoU exactly 0.5 does not match at the 0.5
operating point), and it also means zero-IoU pairs never match, so
degenerate regions stay unmatched.

Both matchers are deterministic.  Greedy breaks score ties by input
index and IoU ties by lowest ground-truth index.  Optimal breaks
total-IoU ties toward the lexicographically smallest set of
(detection, ground truth) index pairs; ties are resolved in exact
arithmetic, so equal totals are recognized reliably even though the
IoU values are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

from .geometry import Ellipse, Rect, iou_ellipse_rect, iou_rect

__all__ = [
    "Detection",
    "GroundTruth",
    "MatchPair",
    "MatchOutcome",
    "iou_matrix",
    "match_greedy",
    "match_optimal",
    "greedy_assignment",
    "greedy_assignment_by_iou",
    "optimal_assignment",
]

Region = Union[Rect, Ellipse]


@dataclass(frozen=True, slots=True)
class Detection:
    """A scored rectangular detection on one image."""

    region: Rect
    score: float
    image_id: str

    def __post_init__(self) -> None:
        if not isinstance(self.region, Rect):
            raise TypeError(f"Detection region must be a Rect, got {type(self.region).__name__}")
        if not math.isfinite(self.score):
            raise ValueError(f"Detection score must be finite, got {self.score!r}")


@dataclass(frozen=True, slots=True)
class GroundTruth:
    """An annotated face region (rectangle or ellipse) on one image."""

    region: Region
    image_id: str

    def __post_init__(self) -> None:
        if not isinstance(self.region, (Rect, Ellipse)):
            raise TypeError(
                f"GroundTruth region must be a Rect or Ellipse, got {type(self.region).__name__}"
            )


class MatchPair(NamedTuple):
    detection: int
    ground_truth: int
    iou: float


@dataclass(frozen=True, slots=True)
class MatchOutcome:
    """One-to-one pairing result; indices refer to the matcher's inputs."""

    pairs: tuple[MatchPair, ...]
    unmatched_detections: frozenset[int]
    unmatched_ground_truths: frozenset[int]

    def __post_init__(self) -> None:
        dets = [p.detection for p in self.pairs]
        gts = [p.ground_truth for p in self.pairs]
        if len(set(dets)) != len(dets):
            raise ValueError("a detection index appears in more than one pair")
        if len(set(gts)) != len(gts):
            raise ValueError("a ground-truth index appears in more than one pair")
        if set(dets) & self.unmatched_detections:
            raise ValueError("a detection index is both paired and unmatched")
        if set(gts) & self.unmatched_ground_truths:
            raise ValueError("a ground-truth index is both paired and unmatched")
        for pair in self.pairs:
            if not 0.0 <= pair.iou <= 1.0:
                raise ValueError(f"pair IoU out of range: {pair.iou!r}")

    @property
    def total_iou(self) -> float:
        return math.fsum(p.iou for p in self.pairs)


def region_iou(detection_region: Rect, gt_region: Region, polygon_vertices: int = 1024) -> float:
    """IoU between a detection rectangle and a rect or ellipse ground truth."""
    if isinstance(gt_region, Ellipse):
        return iou_ellipse_rect(gt_region, detection_region, polygon_vertices)
    return iou_rect(detection_region, gt_region)


def iou_matrix(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    polygon_vertices: int = 1024,
) -> list[list[float]]:
    """Dense detection-by-ground-truth IoU matrix."""
    return [
        [region_iou(det.region, gt.region, polygon_vertices) for gt in gts]
        for det in dets
    ]


def _check_threshold(iou_threshold: float) -> None:
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")


def _check_single_image(dets: Sequence[Detection], gts: Sequence[GroundTruth]) -> None:
    ids = {d.image_id for d in dets} | {g.image_id for g in gts}
    if len(ids) > 1:
        raise ValueError(f"matching requires a single image, got image_ids {sorted(ids)}")


def _outcome(pairs: Sequence[tuple[int, int, float]], n_dets: int, n_gts: int) -> MatchOutcome:
    ordered = tuple(MatchPair(*p) for p in sorted(pairs))
    matched_dets = {p.detection for p in ordered}
    matched_gts = {p.ground_truth for p in ordered}
    return MatchOutcome(
        pairs=ordered,
        unmatched_detections=frozenset(i for i in range(n_dets) if i not in matched_dets),
        unmatched_ground_truths=frozenset(j for j in range(n_gts) if j not in matched_gts),
    )


def greedy_assignment(
    matrix: Sequence[Sequence[float]],
    priority: Sequence[int],
    iou_threshold: float,
) -> list[tuple[int, int, float]]:
    """Row-driven greedy matching on an IoU matrix.

    Rows are visited in ``priority`` order; each claims the unclaimed
    column of maximal IoU (ties: lowest column index) when that IoU
    exceeds the threshold.
    """
    claimed: set[int] = set()
    pairs = []
    n_cols = len(matrix[0]) if matrix else 0
    for i in priority:
        row = matrix[i]
        best_j = -1
        best_iou = 0.0
        for j in range(n_cols):
            if j not in claimed and row[j] > best_iou:
                best_j = j
                best_iou = row[j]
        if best_j >= 0 and best_iou > iou_threshold:
            claimed.add(best_j)
            pairs.append((i, best_j, best_iou))
    return pairs


def greedy_assignment_by_iou(
    matrix: Sequence[Sequence[float]],
    iou_threshold: float,
) -> list[tuple[int, int, float]]:
    """Pair-driven greedy matching: highest IoU first, one-to-one.

    Ties are broken by (row index, column index).  Used for proposal
    recall, where no score ordering is wanted.
    """
    candidates = [
        (i, j, value)
        for i, row in enumerate(matrix)
        for j, value in enumerate(row)
        if value > iou_threshold
    ]
    candidates.sort(key=lambda c: (-c[2], c[0], c[1]))
    used_rows: set[int] = set()
    used_cols: set[int] = set()
    pairs = []
    for i, j, value in candidates:
        if i in used_rows or j in used_cols:
            continue
        used_rows.add(i)
        used_cols.add(j)
        pairs.append((i, j, value))
    return pairs


def _scaled_weights(values: Sequence[float]) -> list[int]:
    """Represent floats as exact integers over a shared power-of-two denominator.

    Every finite float is a dyadic rational, so totals computed on these
    integers are exact; comparisons between candidate assignments are
    then free of accumulation error.
    """
    ratios = [v.as_integer_ratio() for v in values]
    common = max((den for _, den in ratios), default=1)
    return [num * (common // den) for num, den in ratios]


def _solve_square(cost: list[list[int]]) -> list[int]:
    """Minimum-cost perfect assignment on a square matrix (Hungarian).

    Shortest-augmenting-path formulation with potentials; all arithmetic
    stays in exact integers.  Returns the assigned column per row.
    """
    n = len(cost)
    inf = float("inf")
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: 1-based row matched to column j, 0 = free
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv: list[float] = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    columns = [0] * n
    for j in range(1, n + 1):
        if p[j]:
            columns[p[j] - 1] = j - 1
    return columns


def _max_total(items: Sequence[tuple[int, int, int]]) -> int:
    """Maximum achievable weight total over one-to-one pairs.

    ``items`` are (row, col, integer weight) candidates with positive
    weights; rows/cols absent from the list simply stay unmatched.
    """
    if not items:
        return 0
    rows = sorted({i for i, _, _ in items})
    cols = sorted({j for _, j, _ in items})
    row_index = {r: k for k, r in enumerate(rows)}
    col_index = {c: k for k, c in enumerate(cols)}
    n = max(len(rows), len(cols))
    cost = [[0] * n for _ in range(n)]
    for i, j, w in items:
        cost[row_index[i]][col_index[j]] = -w
    assigned = _solve_square(cost)
    return -sum(cost[r][assigned[r]] for r in range(len(rows)))


def optimal_assignment(
    matrix: Sequence[Sequence[float]],
    iou_threshold: float,
) -> list[tuple[int, int, float]]:
    """Assignment maximizing total IoU over admissible pairs.

    Among equal-total assignments, returns the lexicographically
    smallest set of (row, col) pairs.  The refinement loop fixes pairs
    in lexicographic order, keeping a candidate only when the optimum is
    still reachable through strictly larger pairs; totals are compared
    in exact integer arithmetic.
    """
    admissible = [
        (i, j, value)
        for i, row in enumerate(matrix)
        for j, value in enumerate(row)
        if value > iou_threshold
    ]
    if not admissible:
        return []
    weights = _scaled_weights([value for _, _, value in admissible])
    items = [(i, j, w, value) for (i, j, value), w in zip(admissible, weights)]
    target = _max_total([(i, j, w) for i, j, w, _ in items])
    chosen: list[tuple[int, int, float]] = []
    accumulated = 0
    available = items
    while accumulated < target:
        for idx, (i, j, w, value) in enumerate(available):
            rest = [q for q in available[idx + 1 :] if q[0] != i and q[1] != j]
            if accumulated + w + _max_total([(r, c, rw) for r, c, rw, _ in rest]) == target:
                chosen.append((i, j, value))
                accumulated += w
                available = rest
                break
        else:  # pragma: no cover - the invariant guarantees progress
            raise AssertionError("optimal assignment refinement failed to reach the optimum")
    return chosen


def match_greedy(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_threshold: float,
    *,
    polygon_vertices: int = 1024,
) -> MatchOutcome:
    """Greedy score-ordered matching of detections to ground truths.

    All inputs must share one image id.  The result depends only on the
    score ordering, not on score magnitudes.
    """
    _check_threshold(iou_threshold)
    _check_single_image(dets, gts)
    matrix = iou_matrix(dets, gts, polygon_vertices)
    priority = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    pairs = greedy_assignment(matrix, priority, iou_threshold)
    return _outcome(pairs, len(dets), len(gts))


def match_optimal(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_threshold: float,
    *,
    polygon_vertices: int = 1024,
) -> MatchOutcome:
    """Total-IoU-maximizing matching of detections to ground truths."""
    _check_threshold(iou_threshold)
    _check_single_image(dets, gts)
    matrix = iou_matrix(dets, gts, polygon_vertices)
    pairs = optimal_assignment(matrix, iou_threshold)
    return _outcome(pairs, len(dets), len(gts))
