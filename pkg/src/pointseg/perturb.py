"""Gaussian point-annotation shifts kept inside the nucleus.

Each nucleus draws ``P_X ~ N(0, (eps * D_X / 3)^2)`` and
``P_Y ~ N(0, (eps * D_Y / 3)^2)`` around its centroid, where ``D_X``/``D_Y`` are
the centroid's distances to the nearest horizontal/vertical exit from the
nucleus. Draws landing outside the nucleus are redrawn.

Randomness: every instance gets its own PCG64 stream seeded from
``(seed, instance_id)``; normals come from Box-Muller on pairs of uniforms
from that stream, so results do not depend on processing order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_instance_map
from .raster import centroid


class PerturbationSaturationWarning(UserWarning):
    """Rejection sampling hit ``max_redraws``; the centroid was returned."""


@dataclass(frozen=True)
class PerturbConfig:
    epsilon: float = 0.0
    seed: int = 0
    max_redraws: int = 1000

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.max_redraws < 1:
            raise ValueError("max_redraws must be >= 1")


def round_half_down(value: float) -> int:
    """Nearest integer, ties toward negative infinity."""
    return int(math.ceil(value - 0.5))


def scan_origin(instance_pixels: np.ndarray, center: tuple[float, float]) -> tuple[int, int]:
    """Rounded centroid pixel, or the instance pixel nearest to it when outside.

    Nearest-pixel ties go to the first pixel in row-major order.
    """
    x, y = round_half_down(center[0]), round_half_down(center[1])
    height, width = instance_pixels.shape
    if 0 <= x < width and 0 <= y < height and instance_pixels[y, x]:
        return x, y
    ys, xs = np.nonzero(instance_pixels)
    if len(xs) == 0:
        raise ValueError("instance is empty")
    d2 = (xs - center[0]) ** 2 + (ys - center[1]) ** 2
    i = int(np.argmin(d2))
    return int(xs[i]), int(ys[i])


def max_perturbation_distances(instance_pixels, center) -> tuple[float, float]:
    """``(D_X, D_Y)``: distance from ``center`` to the nearer exit along each axis.

    Scans the origin pixel's row (column) outward to the first pixel not in
    the instance; the exit lies on the half-pixel boundary before it. The
    image border counts as outside.
    """
    mask = np.asarray(instance_pixels, dtype=bool)
    cx, cy = center
    ox, oy = scan_origin(mask, center)

    def exits(line: np.ndarray, origin: int, c: float) -> float:
        outside = np.nonzero(~line)[0]
        after = outside[outside > origin]
        before = outside[outside < origin]
        right = (after[0] if len(after) else len(line)) - 0.5
        left = (before[-1] if len(before) else -1) + 0.5
        return min(abs(right - c), abs(c - left))

    return exits(mask[oy, :], ox, cx), exits(mask[:, ox], oy, cy)


def _box_muller(rng: np.random.Generator) -> tuple[float, float]:
    u1 = 1.0 - rng.random()  # (0, 1]
    u2 = rng.random()
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


def _inside(mask: np.ndarray, x: float, y: float) -> bool:
    px, py = round_half_down(x), round_half_down(y)
    height, width = mask.shape
    return 0 <= px < width and 0 <= py < height and bool(mask[py, px])


def _shift(center, distances, mask, epsilon, max_redraws, rng) -> tuple[tuple[float, float], bool]:
    cx, cy = center
    if epsilon == 0:
        return (cx, cy), False
    sx, sy = epsilon * distances[0] / 3.0, epsilon * distances[1] / 3.0
    for _ in range(max_redraws):
        zx, zy = _box_muller(rng)
        x, y = cx + zx * sx, cy + zy * sy
        if _inside(mask, x, y):
            return (x, y), False
    return (cx, cy), True


def instance_rng(seed: int, instance_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, instance_id])))


def shift_point(center, distances, instance_pixels, cfg: PerturbConfig, rng: np.random.Generator | None = None):
    """One shifted, real-valued point whose rounded pixel lies in the instance.

    ``rng`` defaults to a fresh stream from ``cfg.seed``; pass a generator to
    take successive draws. After ``cfg.max_redraws`` rejections the centroid
    is returned with a :class:`PerturbationSaturationWarning`.
    """
    mask = np.asarray(instance_pixels, dtype=bool)
    rng = rng if rng is not None else instance_rng(cfg.seed, 0)
    point, saturated = _shift(center, distances, mask, cfg.epsilon, cfg.max_redraws, rng)
    if saturated:
        warnings.warn(
            f"no in-instance draw after {cfg.max_redraws} attempts; returning centroid",
            PerturbationSaturationWarning,
            stacklevel=2,
        )
    return point


@dataclass
class PerturbResult:
    points: np.ndarray
    instance_ids: np.ndarray
    n_saturated: int
    n_snapped: int


def perturb_pointset(instances, cfg: PerturbConfig) -> PerturbResult:
    """One shifted integer point per instance, in ascending instance-id order.

    A result whose rounded pixel falls outside its instance (a saturated draw
    on a concave nucleus) is snapped to the scan origin, which always lies
    inside, and counted in ``n_snapped``.
    """
    instances = check_instance_map(instances)
    ids = np.unique(instances)
    ids = ids[ids > 0]
    points = np.empty((len(ids), 2), dtype=np.int64)
    saturated = snapped = 0
    boxes = ndimage.find_objects(instances)
    height, width = instances.shape
    for row, inst_id in enumerate(ids):
        ys, xs = boxes[inst_id - 1]
        # pad by one pixel so interior exits never coincide with the crop edge
        ly0, ly1 = max(0, ys.start - 1), min(height, ys.stop + 1)
        lx0, lx1 = max(0, xs.start - 1), min(width, xs.stop + 1)
        local = instances[ly0:ly1, lx0:lx1] == inst_id
        c = centroid(local)
        distances = max_perturbation_distances(local, c)
        rng = instance_rng(cfg.seed, int(inst_id))
        (x, y), sat = _shift(c, distances, local, cfg.epsilon, cfg.max_redraws, rng)
        saturated += sat
        px, py = round_half_down(x), round_half_down(y)
        if not _inside(local, px, py):
            px, py = scan_origin(local, c)
            snapped += 1
        points[row] = (px + lx0, py + ly0)
    return PerturbResult(points=points, instance_ids=ids, n_saturated=saturated, n_snapped=snapped)


class PointPerturber(TransformerMixin, BaseEstimator):
    """``transform(instances) -> (K, 2)`` shifted points, one per instance."""

    def __init__(self, epsilon=0.0, random_state=0, max_redraws=1000):
        self.epsilon = epsilon
        self.random_state = random_state
        self.max_redraws = max_redraws

    def fit(self, X=None, y=None):
        self.config_ = PerturbConfig(self.epsilon, self.random_state, self.max_redraws)
        return self

    def transform(self, X):
        if not hasattr(self, "config_"):
            self.fit()
        result = perturb_pointset(X, self.config_)
        self.n_saturated_ = result.n_saturated
        self.instance_ids_ = result.instance_ids
        return result.points
