"""Rasterized Voronoi partitions over point annotations and exact distance maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ._validation import check_binary_mask, check_points

# Candidates fetched from the KD-tree per pixel before falling back to brute force.
_KD_CANDIDATES = 8
_CHUNK = 1 << 18


@dataclass(frozen=True)
class VoronoiPartition:
    """Nearest-seed labels (1..K, no background) and the two-sided edge mask."""

    cell_labels: np.ndarray
    edges: np.ndarray

    @property
    def n_cells(self) -> int:
        return int(self.cell_labels.max())


def voronoi_edges(cell_labels: np.ndarray) -> np.ndarray:
    """Mark both pixels of every horizontally or vertically adjacent label change."""
    edges = np.zeros(cell_labels.shape, dtype=bool)
    horizontal = cell_labels[:, 1:] != cell_labels[:, :-1]
    edges[:, 1:] |= horizontal
    edges[:, :-1] |= horizontal
    vertical = cell_labels[1:, :] != cell_labels[:-1, :]
    edges[1:, :] |= vertical
    edges[:-1, :] |= vertical
    return edges


def _nearest_seed_bruteforce(px, py, seeds) -> np.ndarray:
    best = np.full(len(px), -1, dtype=np.int64)
    best_d2 = np.full(len(px), np.iinfo(np.int64).max, dtype=np.int64)
    for index, (sx, sy) in enumerate(seeds):
        d2 = (px - sx) ** 2 + (py - sy) ** 2
        closer = d2 < best_d2  # strict: earlier seeds win ties
        best[closer] = index
        best_d2[closer] = d2[closer]
    return best


def _nearest_seed_kdtree(tree, px, py, seeds, k) -> np.ndarray:
    _, idx = tree.query(np.column_stack([px, py]).astype(np.float64), k=k)
    cand = seeds[idx]
    d2 = (cand[..., 0] - px[:, None]) ** 2 + (cand[..., 1] - py[:, None]) ** 2
    dmin = d2.min(axis=1)
    # lowest seed index among the exact-minimum candidates
    nearest = np.where(d2 == dmin[:, None], idx, np.iinfo(np.int64).max).min(axis=1)
    # the tie set may extend past the fetched candidates
    unresolved = d2[:, -1] == dmin
    if unresolved.any():
        nearest[unresolved] = _nearest_seed_bruteforce(px[unresolved], py[unresolved], seeds)
    return nearest


def voronoi_partition(points, width: int, height: int) -> VoronoiPartition:
    """Label each pixel with the 1-based index of its nearest seed.

    Distances are squared Euclidean in integer arithmetic; ties go to the
    lowest seed index.
    """
    if width < 1 or height < 1:
        raise ValueError(f"dimensions must be positive, got width={width}, height={height}")
    seeds = check_points(points, (height, width), allow_empty=False)
    ys, xs = np.indices((height, width))
    px, py = xs.ravel().astype(np.int64), ys.ravel().astype(np.int64)

    k = min(len(seeds), _KD_CANDIDATES)
    if k == len(seeds):
        nearest = _nearest_seed_bruteforce(px, py, seeds)
    else:
        tree = cKDTree(seeds.astype(np.float64))
        nearest = np.empty(len(px), dtype=np.int64)
        for start in range(0, len(px), _CHUNK):
            stop = start + _CHUNK
            nearest[start:stop] = _nearest_seed_kdtree(tree, px[start:stop], py[start:stop], seeds, k)

    cell_labels = (nearest + 1).reshape(height, width)
    return VoronoiPartition(cell_labels=cell_labels, edges=voronoi_edges(cell_labels))


def distance_transform(mask, sentinel: float = np.inf) -> np.ndarray:
    """Exact Euclidean distance from each pixel to the nearest 1-pixel.

    An empty mask yields ``sentinel`` everywhere.
    """
    mask = check_binary_mask(mask)
    if not mask.any():
        return np.full(mask.shape, sentinel, dtype=np.float64)
    return ndimage.distance_transform_edt(~mask)
