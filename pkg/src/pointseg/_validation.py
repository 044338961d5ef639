"""Input validation helpers shared by the functional API and the estimators.

Arrays follow the numpy image convention: ``mask[y, x]``. Point sets are
integer arrays of shape ``(K, 2)`` holding ``(x, y)`` pairs.
"""

from __future__ import annotations

import numpy as np


def check_raster(array, name: str = "raster", ndim: int = 2) -> np.ndarray:
    array = np.asarray(array)
    if array.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {array.shape}")
    if array.shape[0] < 1 or array.shape[1] < 1:
        raise ValueError(f"{name} must have positive width and height, got {array.shape}")
    return array


def check_binary_mask(mask, name: str = "mask") -> np.ndarray:
    mask = check_raster(mask, name)
    if mask.dtype != bool:
        values = np.unique(mask)
        if not np.isin(values, (0, 1)).all():
            raise ValueError(f"{name} must be binary (values in {{0, 1}}), found {values[:5]}")
        mask = mask.astype(bool)
    return mask


def check_instance_map(instances, name: str = "instances") -> np.ndarray:
    instances = check_raster(instances, name)
    if not np.issubdtype(instances.dtype, np.integer):
        if np.issubdtype(instances.dtype, np.floating) and np.all(np.mod(instances, 1) == 0):
            instances = instances.astype(np.int64)
        elif instances.dtype == bool:
            instances = instances.astype(np.int64)
        else:
            raise ValueError(f"{name} must hold integer labels, got dtype {instances.dtype}")
    if instances.size and instances.min() < 0:
        raise ValueError(f"{name} must be non-negative")
    return instances


def check_color_image(image, name: str = "image") -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValueError(f"{name} must have positive width and height")
    if image.size and (image.min() < 0 or image.max() > 255):
        raise ValueError(f"{name} channel values must lie in [0, 255]")
    return image


def check_points(points, shape=None, name: str = "points", allow_empty: bool = True) -> np.ndarray:
    """Return ``points`` as an ``(K, 2)`` int64 array of ``(x, y)`` pairs.

    When ``shape`` (height, width) is given, every point must fall inside it.
    Duplicate coordinates are rejected since each point stands for one nucleus.
    """
    points = np.asarray(points)
    if points.size == 0:
        points = points.reshape(0, 2)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"{name} must have shape (K, 2), got {points.shape}")
    if not np.issubdtype(points.dtype, np.integer):
        if not np.all(np.mod(points, 1) == 0):
            raise ValueError(f"{name} must hold integer pixel coordinates")
    points = points.astype(np.int64)
    if not allow_empty and len(points) == 0:
        raise ValueError(f"{name} must contain at least one point")
    if shape is not None and len(points):
        height, width = shape[:2]
        xs, ys = points[:, 0], points[:, 1]
        bad = (xs < 0) | (xs >= width) | (ys < 0) | (ys >= height)
        if bad.any():
            first = points[np.argmax(bad)]
            raise ValueError(
                f"{name}: point ({first[0]}, {first[1]}) outside image of width {width}, height {height}"
            )
    if len(np.unique(points, axis=0)) != len(points):
        raise ValueError(f"{name} contains duplicate coordinates")
    return points


def check_same_shape(*arrays, names=None) -> None:
    shapes = [np.shape(a)[:2] for a in arrays]
    if len(set(shapes)) > 1:
        names = names or [f"input{i}" for i in range(len(arrays))]
        desc = ", ".join(f"{n}={s}" for n, s in zip(names, shapes))
        raise ValueError(f"dimension mismatch: {desc}")
