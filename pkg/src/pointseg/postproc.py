"""Instance maps from a segmentation probability map plus distance maps."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_raster, check_same_shape
from .raster import connected_components, relabel_sequential
from .targets import HoverMaps


@dataclass(frozen=True)
class PostprocConfig:
    seg_threshold: float = 0.5
    gradient_threshold: float = 0.4
    min_instance_area: int = 10

    def __post_init__(self):
        if not 0 < self.seg_threshold < 1:
            raise ValueError("seg_threshold must lie in (0, 1)")
        if not self.gradient_threshold > 0:
            raise ValueError("gradient_threshold must be > 0")
        if self.min_instance_area < 0:
            raise ValueError("min_instance_area must be >= 0")


def boundary_evidence(maps: HoverMaps) -> np.ndarray:
    """Max of |d horizontal / dx| and |d vertical / dy| by central differences."""
    horizontal = np.asarray(maps.horizontal, dtype=np.float64)
    vertical = np.asarray(maps.vertical, dtype=np.float64)
    gx = np.gradient(horizontal, axis=1) if horizontal.shape[1] > 1 else np.zeros_like(horizontal)
    gy = np.gradient(vertical, axis=0) if vertical.shape[0] > 1 else np.zeros_like(vertical)
    return np.maximum(np.abs(gx), np.abs(gy))


_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def marker_watershed(evidence: np.ndarray, markers: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Flood ``markers`` over ``mask`` in increasing ``evidence`` order.

    Heap entries are ``(evidence, row-major index, label)`` so equal
    priorities resolve by pixel position, then by the lower label.
    8-neighbourhood.
    """
    height, width = evidence.shape
    labels = markers.astype(np.int64).copy()
    heap: list[tuple[float, int, int]] = []

    def push_neighbors(y: int, x: int, lab: int) -> None:
        for dy, dx in _NEIGHBORS:
            ny, nx = y + dy, x + dx
            if 0 <= ny < height and 0 <= nx < width and mask[ny, nx] and labels[ny, nx] == 0:
                heapq.heappush(heap, (float(evidence[ny, nx]), ny * width + nx, lab))

    for y, x in zip(*np.nonzero(labels)):
        push_neighbors(int(y), int(x), int(labels[y, x]))
    while heap:
        _, flat, lab = heapq.heappop(heap)
        y, x = divmod(flat, width)
        if labels[y, x]:
            continue
        labels[y, x] = lab
        push_neighbors(y, x, lab)
    return labels


def instances_from_predictions(seg, maps: HoverMaps, cfg: PostprocConfig | None = None) -> np.ndarray:
    """Threshold, seed markers where the distance maps are smooth, flood, filter.

    Foreground components that contain no marker are kept as single
    instances rather than dropped.
    """
    cfg = cfg or PostprocConfig()
    seg = check_raster(seg, "seg").astype(np.float64)
    check_same_shape(seg, maps.horizontal, maps.vertical, names=["seg", "horizontal", "vertical"])
    fg = seg >= cfg.seg_threshold
    if not fg.any():
        return np.zeros(seg.shape, dtype=np.int64)

    evidence = boundary_evidence(maps)
    markers = connected_components(fg & (evidence < cfg.gradient_threshold), 8)
    labels = marker_watershed(evidence, markers, fg)

    orphans = connected_components(fg & (labels == 0), 8)
    labels[orphans > 0] = orphans[orphans > 0] + labels.max()

    counts = np.bincount(labels.ravel())
    small = counts < cfg.min_instance_area
    small[0] = False
    labels[small[labels]] = 0
    return relabel_sequential(labels)


class InstanceReconstructor(BaseEstimator):
    """``predict(X)`` with ``X`` of shape (H, W, 3): seg probability, horizontal, vertical."""

    def __init__(self, seg_threshold=0.5, gradient_threshold=0.4, min_instance_area=10):
        self.seg_threshold = seg_threshold
        self.gradient_threshold = gradient_threshold
        self.min_instance_area = min_instance_area

    def fit(self, X=None, y=None):
        self.config_ = PostprocConfig(self.seg_threshold, self.gradient_threshold, self.min_instance_area)
        return self

    def predict(self, X):
        check_is_fitted(self, "config_")
        X = np.asarray(X)
        if X.ndim != 3 or X.shape[2] != 3:
            raise ValueError(f"X must have shape (H, W, 3), got {X.shape}")
        maps = HoverMaps(X[..., 1], X[..., 2])
        return instances_from_predictions(X[..., 0], maps, self.config_)
