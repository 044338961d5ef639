"""Pixel-grid primitives: connected components, disk dilation, area, centroid."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ._validation import check_binary_mask, check_instance_map, check_points

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def disk(radius: float) -> np.ndarray:
    """Boolean disk of offsets with ``dx**2 + dy**2 <= radius**2``.

    The returned array has shape ``(2R + 1, 2R + 1)`` with ``R = floor(radius)``
    and the origin at its center.
    """
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    half = int(np.floor(radius))
    offsets = np.arange(-half, half + 1)
    dy, dx = np.meshgrid(offsets, offsets, indexing="ij")
    return dx * dx + dy * dy <= radius * radius


def relabel_sequential(labels: np.ndarray) -> np.ndarray:
    """Renumber non-zero labels to ``1..N`` in row-major first-pixel order."""
    labels = np.asarray(labels)
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids != 0
    ids, first = ids[keep], first[keep]
    ordered = ids[np.argsort(first, kind="stable")]
    out = np.zeros(labels.shape, dtype=np.int64)
    if len(ordered) == 0:
        return out
    lookup = np.zeros(int(ids.max()) + 1, dtype=np.int64)
    lookup[ordered] = np.arange(1, len(ordered) + 1)
    out.ravel()[:] = lookup[flat]
    return out


def connected_components(mask, connectivity: int = 8) -> np.ndarray:
    """Label the 1-regions of ``mask``.

    Ids run ``1..N`` in order of each region's first pixel in a row-major
    scan; background stays 0.
    """
    mask = check_binary_mask(mask)
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, _ = ndimage.label(mask, structure=_STRUCTURES[connectivity])
    return relabel_sequential(labels)


def dilate(mask, radius: float) -> np.ndarray:
    """Binary dilation by a Euclidean disk, clipped to the image bounds."""
    mask = check_binary_mask(mask)
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if radius < 1 or not mask.any():
        return mask.copy()
    return ndimage.binary_dilation(mask, structure=disk(radius))


def area(mask) -> int:
    return int(np.count_nonzero(check_binary_mask(mask)))


def centroid(instance_pixels) -> tuple[float, float]:
    """Mean ``(x, y)`` of the True pixels of a boolean mask (not rounded)."""
    ys, xs = np.nonzero(np.asarray(instance_pixels))
    if len(xs) == 0:
        raise ValueError("centroid of an empty pixel set is undefined")
    return float(xs.mean()), float(ys.mean())


def instance_centroids(instances) -> dict[int, tuple[float, float]]:
    """Pixel-mean centroid of every instance id, keyed by id."""
    instances = check_instance_map(instances)
    flat = instances.ravel()
    counts = np.bincount(flat)
    ys, xs = np.indices(instances.shape)
    sx = np.bincount(flat, weights=xs.ravel())
    sy = np.bincount(flat, weights=ys.ravel())
    return {
        int(i): (sx[i] / counts[i], sy[i] / counts[i])
        for i in np.nonzero(counts)[0]
        if i != 0
    }


def points_to_mask(points, shape) -> np.ndarray:
    """Rasterize a point set into a boolean mask of the given (height, width)."""
    points = check_points(points, shape)
    mask = np.zeros(shape[:2], dtype=bool)
    mask[points[:, 1], points[:, 0]] = True
    return mask


def stamp_disk(mask: np.ndarray, x: int, y: int, radius: float) -> None:
    """Set every pixel within ``radius`` of ``(x, y)`` to True, in place, clipped."""
    element = disk(radius)
    half = element.shape[0] // 2
    height, width = mask.shape
    y0, y1 = max(0, y - half), min(height, y + half + 1)
    x0, x1 = max(0, x - half), min(width, x + half + 1)
    mask[y0:y1, x0:x1] |= element[y0 - (y - half):y1 - (y - half), x0 - (x - half):x1 - (x - half)]
