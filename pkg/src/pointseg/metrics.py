"""DICE, point-based detection quality and IoU-matched detection quality."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_binary_mask, check_instance_map, check_points, check_same_shape
from .raster import instance_centroids


@dataclass
class DQReport:
    tp: int
    fp: int
    fn_: int
    assignment: list[tuple[int, int]] = field(default_factory=list)

    @property
    def score(self) -> float:
        return detection_quality(self.tp, self.fp, self.fn_)

    def __add__(self, other: "DQReport") -> "DQReport":
        return DQReport(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)


def detection_quality(tp: int, fp: int, fn: int) -> float:
    """``tp / (tp + fp/2 + fn/2)``; 1.0 when there is nothing to detect or predict."""
    denom = tp + 0.5 * fp + 0.5 * fn
    return 1.0 if denom == 0 else tp / denom


def pool_reports(reports) -> DQReport:
    """Sum counts over tiles before taking the ratio (corpus-level score)."""
    total = DQReport(0, 0, 0)
    for report in reports:
        total = total + report
    return total


def mean_score(reports) -> float:
    """Average of per-tile scores (the alternative to pooling)."""
    scores = [r.score for r in reports]
    return float(np.mean(scores)) if scores else 1.0


def dice(pred, gt) -> float:
    """``2|X & Y| / (|X| + |Y|)``; 1.0 when both masks are empty."""
    pred = check_binary_mask(pred, "pred")
    gt = check_binary_mask(gt, "gt")
    check_same_shape(pred, gt, names=["pred", "gt"])
    total = int(pred.sum()) + int(gt.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(pred & gt)) / total


def dq_point(pred, centroids) -> DQReport:
    """Detection quality where a hit is a centroid inside a prediction segment.

    Every segment is matched to at most one of the centroids it covers: the
    one nearest to the segment's own centroid, ties to the lowest index.
    Segments covering no centroid are false positives; centroids left
    unmatched are false negatives. ``assignment`` lists ``(segment id,
    centroid index)`` pairs.
    """
    pred = check_instance_map(pred, "pred")
    centroids = check_points(centroids, pred.shape, "centroids")
    seg_ids = np.unique(pred[pred > 0])
    owner = pred[centroids[:, 1], centroids[:, 0]] if len(centroids) else np.zeros(0, dtype=np.int64)
    seg_centers = instance_centroids(pred)

    assignment = []
    fp = 0
    for seg in seg_ids:
        covered = np.nonzero(owner == seg)[0]
        if len(covered) == 0:
            fp += 1
            continue
        sx, sy = seg_centers[int(seg)]
        d2 = (centroids[covered, 0] - sx) ** 2 + (centroids[covered, 1] - sy) ** 2
        # argmin returns the first minimum and covered is ascending
        assignment.append((int(seg), int(covered[np.argmin(d2)])))
    tp = len(assignment)
    return DQReport(tp=tp, fp=fp, fn_=len(centroids) - tp, assignment=assignment)


def pairwise_iou(pred: np.ndarray, gt: np.ndarray):
    """IoU for every overlapping (pred id, gt id) pair as three aligned arrays."""
    p = pred.ravel().astype(np.int64)
    g = gt.ravel().astype(np.int64)
    p_area = np.bincount(p)
    g_area = np.bincount(g)
    both = (p > 0) & (g > 0)
    if not both.any():
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    pairs, inter = np.unique(np.stack([p[both], g[both]]), axis=1, return_counts=True)
    union = p_area[pairs[0]] + g_area[pairs[1]] - inter
    return pairs[0], pairs[1], inter / union


def dq_classic(pred, gt) -> DQReport:
    """Detection quality with one-to-one matching of segments at IoU > 0.5."""
    pred = check_instance_map(pred, "pred")
    gt = check_instance_map(gt, "gt")
    check_same_shape(pred, gt, names=["pred", "gt"])
    p_ids, g_ids, iou = pairwise_iou(pred, gt)
    matched = iou > 0.5
    assignment = sorted(zip(p_ids[matched].tolist(), g_ids[matched].tolist()))
    tp = len(assignment)
    n_pred = len(np.unique(pred[pred > 0]))
    n_gt = len(np.unique(gt[gt > 0]))
    return DQReport(tp=tp, fp=n_pred - tp, fn_=n_gt - tp, assignment=assignment)
