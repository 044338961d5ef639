"""Training targets for the segmentation, distance-map and centroid branches."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_color_image, check_instance_map, check_points, check_same_shape
from .geometry import distance_transform
from .raster import dilate, points_to_mask


class HoverMaps(NamedTuple):
    horizontal: np.ndarray
    vertical: np.ndarray

    def stack(self) -> np.ndarray:
        """Channel-last ``(H, W, 2)`` array: horizontal then vertical."""
        return np.stack([self.horizontal, self.vertical], axis=-1)


def hover_maps(instances) -> HoverMaps:
    """Per-instance offsets from the pixel-mean centroid, normalized per axis.

    Each axis is divided by the instance's largest absolute offset on that
    axis, so extremal pixels sit at exactly -1 or +1. An instance one pixel
    wide (or tall) gets 0 on that axis. Background is 0.
    """
    instances = check_instance_map(instances)
    horizontal = np.zeros(instances.shape, dtype=np.float64)
    vertical = np.zeros(instances.shape, dtype=np.float64)
    fg = instances > 0
    if not fg.any():
        return HoverMaps(horizontal, vertical)

    labels = instances[fg]
    ys, xs = np.nonzero(fg)
    counts = np.bincount(labels)
    safe = np.maximum(counts, 1)
    cx = np.bincount(labels, weights=xs) / safe
    cy = np.bincount(labels, weights=ys) / safe
    dx = xs - cx[labels]
    dy = ys - cy[labels]

    def normalized(offset):
        extent = np.zeros(len(counts))
        np.maximum.at(extent, labels, np.abs(offset))
        scale = extent[labels]
        return np.divide(offset, scale, out=np.zeros_like(offset), where=scale > 0)

    horizontal[fg] = normalized(dx)
    vertical[fg] = normalized(dy)
    return HoverMaps(horizontal, vertical)


@dataclass(frozen=True)
class CentroidTargetConfig:
    encoding: str = "disk"
    radius_or_sigma: float = 3.0

    def __post_init__(self):
        if self.encoding not in ("disk", "gaussian"):
            raise ValueError(f"encoding must be 'disk' or 'gaussian', got {self.encoding!r}")
        if not self.radius_or_sigma > 0:
            raise ValueError("radius_or_sigma must be > 0")


def centroid_targets(points, width: int, height: int, cfg: CentroidTargetConfig | None = None) -> np.ndarray:
    """Centroid-branch target raster.

    ``disk``: 1 inside a radius-r disk around any point, else 0.
    ``gaussian``: ``max_p exp(-|x - p|^2 / (2 sigma^2))``, computed through the
    distance to the nearest point.
    """
    cfg = cfg or CentroidTargetConfig()
    points = check_points(points, (height, width))
    seeds = points_to_mask(points, (height, width))
    if not seeds.any():
        return np.zeros((height, width), dtype=np.float64)
    if cfg.encoding == "disk":
        return dilate(seeds, cfg.radius_or_sigma).astype(np.float64)
    d = distance_transform(seeds)
    return np.exp(-(d * d) / (2.0 * cfg.radius_or_sigma ** 2))


@dataclass(frozen=True)
class TargetConfig:
    centroid: CentroidTargetConfig = field(default_factory=CentroidTargetConfig)

    def to_dict(self) -> dict:
        return asdict(self)


def config_hash(config: dict) -> str:
    """Short stable hash of a JSON-serializable config."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class TrainingRecord:
    mask: np.ndarray
    hover: HoverMaps
    centroid: np.ndarray
    metadata: dict

    def to_bytes(self) -> bytes:
        """Canonical byte encoding; equal records give equal bytes."""
        parts = [
            json.dumps(self.metadata, sort_keys=True).encode(),
            np.ascontiguousarray(self.mask, dtype=np.uint8).tobytes(),
            np.ascontiguousarray(self.hover.stack(), dtype="<f4").tobytes(),
            np.ascontiguousarray(self.centroid, dtype="<f4").tobytes(),
        ]
        return b"\x00".join(parts)


def build_training_record(
    image,
    instances,
    points,
    cfg: TargetConfig | None = None,
    label_source: str = "true",
    seed: int | None = None,
    tile_id: str | None = None,
) -> TrainingRecord:
    """Bundle the three branch targets for one tile plus provenance."""
    cfg = cfg or TargetConfig()
    if label_source not in ("true", "pseudo"):
        raise ValueError(f"label_source must be 'true' or 'pseudo', got {label_source!r}")
    image = check_color_image(image)
    instances = check_instance_map(instances)
    check_same_shape(image, instances, names=["image", "instances"])
    height, width = instances.shape
    points = check_points(points, (height, width))
    config = cfg.to_dict()
    metadata = {
        "tile_id": tile_id,
        "label_source": label_source,
        "seed": seed,
        "config": config,
        "config_hash": config_hash(config),
        "height": height,
        "width": width,
        "n_instances": int(len(np.unique(instances[instances > 0]))),
        "n_points": int(len(points)),
    }
    return TrainingRecord(
        mask=instances > 0,
        hover=hover_maps(instances),
        centroid=centroid_targets(points, width, height, cfg.centroid),
        metadata=metadata,
    )


class HoverMapEncoder(TransformerMixin, BaseEstimator):
    """``transform(instances) -> (H, W, 2)`` horizontal/vertical distance maps."""

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return hover_maps(X).stack()


def instance_areas(instances) -> np.ndarray:
    instances = check_instance_map(instances)
    ids = np.unique(instances[instances > 0])
    return np.asarray(ndimage.sum_labels(np.ones_like(instances), instances, ids), dtype=np.int64)
