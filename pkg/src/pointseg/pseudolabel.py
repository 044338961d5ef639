"""Pseudo-labels from point annotations.

Pipeline per tile::

    tri = distance_based_labels(points, w, h)        # point disks + Voronoi-edge background
    color = color_kmeans_labels(image, points)        # nuclear color cluster
    ps = combine_pseudo_label(color, tri)
    ps = refine_pseudo_label(ps, points)              # drop stray blobs, patch missed points
    instances = split_instances(ps, voronoi_partition(points, w, h))
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import (
    check_binary_mask,
    check_color_image,
    check_points,
    check_same_shape,
)
from .geometry import VoronoiPartition, distance_transform, voronoi_partition
from .kmeans import LloydKMeans
from .raster import connected_components, dilate, points_to_mask, stamp_disk

BACKGROUND, FOREGROUND, IGNORE = 0, 1, 2


class DegenerateClusteringWarning(UserWarning):
    """Color clustering had nothing to separate; the color label is empty."""


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 3
    feature_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 0.5)
    max_iters: int = 100
    tolerance: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if len(self.feature_weights) != 4:
            raise ValueError("feature_weights needs one weight per feature (R, G, B, distance)")


@dataclass(frozen=True)
class RefineConfig:
    remove_radius: int = 5
    patch_radius: int = 3


@dataclass(frozen=True)
class PseudoLabelConfig:
    point_radius: int = 2
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)


def distance_based_labels(points, width: int, height: int, point_radius: int = 2) -> np.ndarray:
    """Partial label: point disks are foreground, Voronoi edges background, rest ignore."""
    partition = voronoi_partition(points, width, height)
    return _trimask(points, partition, point_radius)


def _trimask(points, partition: VoronoiPartition, point_radius: int) -> np.ndarray:
    shape = partition.cell_labels.shape
    fg = dilate(points_to_mask(points, shape), point_radius)
    tri = np.full(shape, IGNORE, dtype=np.uint8)
    tri[partition.edges] = BACKGROUND
    tri[fg] = FOREGROUND
    return tri


def clustering_features(image, points, weights=(1.0, 1.0, 1.0, 0.5)) -> np.ndarray:
    """Per-pixel ``(R, G, B, d)`` rows, each column min-max scaled to [0, 1] then weighted.

    ``d`` is the Euclidean distance to the nearest annotation point. Constant
    columns scale to 0.
    """
    image = check_color_image(image)
    points = check_points(points, image.shape, allow_empty=False)
    d = distance_transform(points_to_mask(points, image.shape))
    feats = np.concatenate([image.reshape(-1, 3).astype(np.float64), d.reshape(-1, 1)], axis=1)
    lo, hi = feats.min(axis=0), feats.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (feats - lo) / span * np.asarray(weights, dtype=np.float64)


def color_kmeans_labels(image, points, cfg: KMeansConfig | None = None, return_model: bool = False):
    """Foreground = pixels of the cluster whose center is closest to the points.

    A tile whose colors are all identical carries no color evidence: the
    result is all-background and a :class:`DegenerateClusteringWarning` is
    emitted.
    """
    cfg = cfg or KMeansConfig()
    image = check_color_image(image)
    feats = clustering_features(image, points, cfg.feature_weights)
    height, width = image.shape[:2]
    color = image.reshape(-1, 3)
    if (color == color[0]).all() or (feats == feats[0]).all():
        warnings.warn("degenerate clustering: all pixel colors identical", DegenerateClusteringWarning, stacklevel=2)
        mask = np.zeros((height, width), dtype=bool)
        return (mask, None) if return_model else mask
    model = LloydKMeans(
        n_clusters=cfg.k, max_iter=cfg.max_iters, tol=cfg.tolerance, random_state=cfg.seed
    ).fit(feats)
    nuclear = int(np.argmin(model.cluster_centers_[:, 3]))
    mask = (model.labels_ == nuclear).reshape(height, width)
    return (mask, model) if return_model else mask


def combine_pseudo_label(color, dist) -> np.ndarray:
    """``(color OR dist foreground) AND NOT dist background``."""
    color = check_binary_mask(color, "color")
    dist = np.asarray(dist)
    check_same_shape(color, dist, names=["color", "dist"])
    return (color | (dist == FOREGROUND)) & (dist != BACKGROUND)


def refine_pseudo_label(ps, points, remove_radius: int = 5, patch_radius: int = 3) -> np.ndarray:
    """Drop components far from every point, then patch points left uncovered.

    Pass 1 removes each 8-connected component of ``ps`` that has no pixel in
    ``dilate(points, remove_radius)``. Pass 2 walks the points in order and,
    for each point whose pixel is still 0, unions a ``patch_radius`` disk into
    the running result.
    """
    ps = check_binary_mask(ps, "ps")
    points = check_points(points, ps.shape)
    labels = connected_components(ps, 8)
    near = dilate(points_to_mask(points, ps.shape), remove_radius)
    keep = np.unique(labels[near & (labels > 0)])
    out = np.isin(labels, keep) & (labels > 0)
    for x, y in points:
        if not out[y, x]:
            stamp_disk(out, int(x), int(y), patch_radius)
    return out


def split_instances(ps, partition: VoronoiPartition) -> np.ndarray:
    """Cut ``ps`` along Voronoi edges and label the pieces (8-connectivity)."""
    ps = check_binary_mask(ps, "ps")
    check_same_shape(ps, partition.cell_labels, names=["ps", "partition"])
    return connected_components(ps & ~partition.edges, 8)


@dataclass
class PseudoLabelResult:
    trimask: np.ndarray
    color: np.ndarray
    combined: np.ndarray
    refined: np.ndarray
    instances: np.ndarray
    partition: VoronoiPartition
    warnings: list[str] = field(default_factory=list)


def generate_pseudo_labels(image, points, cfg: PseudoLabelConfig | None = None) -> PseudoLabelResult:
    """Run the full point-to-instance pipeline on one tile."""
    cfg = cfg or PseudoLabelConfig()
    image = check_color_image(image)
    height, width = image.shape[:2]
    points = check_points(points, image.shape, allow_empty=False)
    partition = voronoi_partition(points, width, height)
    tri = _trimask(points, partition, cfg.point_radius)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateClusteringWarning)
        color = color_kmeans_labels(image, points, cfg.kmeans)
    combined = combine_pseudo_label(color, tri)
    refined = refine_pseudo_label(combined, points, cfg.refine.remove_radius, cfg.refine.patch_radius)
    instances = split_instances(refined, partition)
    return PseudoLabelResult(
        trimask=tri,
        color=color,
        combined=combined,
        refined=refined,
        instances=instances,
        partition=partition,
        warnings=[str(w.message) for w in caught],
    )


class PseudoLabeler(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`generate_pseudo_labels`.

    ``transform(image, points)`` returns the refined binary pseudo-label, or
    the pseudo-instance map when ``output="instances"``. Nothing is learned,
    so ``fit`` only validates parameters.
    """

    def __init__(
        self,
        point_radius=2,
        n_clusters=3,
        feature_weights=(1.0, 1.0, 1.0, 0.5),
        max_iter=100,
        tol=1e-4,
        random_state=0,
        remove_radius=5,
        patch_radius=3,
        refine=True,
        output="mask",
    ):
        self.point_radius = point_radius
        self.n_clusters = n_clusters
        self.feature_weights = feature_weights
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state
        self.remove_radius = remove_radius
        self.patch_radius = patch_radius
        self.refine = refine
        self.output = output

    def _config(self) -> PseudoLabelConfig:
        return PseudoLabelConfig(
            point_radius=self.point_radius,
            kmeans=KMeansConfig(
                k=self.n_clusters,
                feature_weights=tuple(self.feature_weights),
                max_iters=self.max_iter,
                tolerance=self.tol,
                seed=self.random_state,
            ),
            refine=RefineConfig(self.remove_radius, self.patch_radius),
        )

    def fit(self, X=None, y=None):
        if self.output not in ("mask", "instances"):
            raise ValueError(f"output must be 'mask' or 'instances', got {self.output!r}")
        self.config_ = self._config()
        return self

    def transform(self, X, points):
        if not hasattr(self, "config_"):
            self.fit()
        result = generate_pseudo_labels(X, points, self.config_)
        self.warnings_ = result.warnings
        mask = result.refined if self.refine else result.combined
        if self.output == "mask":
            return mask
        return split_instances(mask, result.partition)

    def fit_transform(self, X, points=None, **fit_params):
        return self.fit(X).transform(X, points)
