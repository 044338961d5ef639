"""Mixed true/pseudo manifests and a synthetic H&E-like nuclei generator."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
from scipy import ndimage

from .perturb import round_half_down
from .raster import instance_centroids, relabel_sequential

LABEL_SOURCES = ("true", "pseudo")


@dataclass(frozen=True)
class TileEntry:
    tile_id: str
    image_path: str
    label_path: str
    label_source: str = "true"
    points_path: str | None = None

    def __post_init__(self):
        if self.label_source not in LABEL_SOURCES:
            raise ValueError(f"label_source must be one of {LABEL_SOURCES}, got {self.label_source!r}")


@dataclass(frozen=True)
class DatasetManifest:
    tiles: tuple[TileEntry, ...]
    pseudo_rate: float = 0.0
    seed: int = 0

    @property
    def n_pseudo(self) -> int:
        return sum(t.label_source == "pseudo" for t in self.tiles)

    def to_dict(self) -> dict:
        return {
            "pseudo_rate": self.pseudo_rate,
            "seed": self.seed,
            "tiles": [asdict(t) for t in self.tiles],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        try:
            tiles = tuple(TileEntry(**t) for t in data["tiles"])
            return cls(tiles=tiles, pseudo_rate=float(data.get("pseudo_rate", 0.0)), seed=int(data.get("seed", 0)))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed manifest: expected {{'tiles': [...], 'pseudo_rate', 'seed'}} ({exc})") from exc

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        return cls.from_dict(json.loads(text))


def pseudo_count(rate: float, n_tiles: int) -> int:
    """``round(rate * n_tiles)`` with halves rounded up, computed in decimal."""
    return int((Decimal(repr(float(rate))) * n_tiles).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def mix_labels(tiles, pseudo_rate: float, seed: int) -> DatasetManifest:
    """Mark ``round(pseudo_rate * N)`` uniformly chosen tiles as pseudo-labelled.

    Tile order is preserved; only ``label_source`` changes. A new seed gives
    a fresh draw.
    """
    if not 0.0 <= pseudo_rate <= 1.0:
        raise ValueError(f"pseudo_rate must lie in [0, 1], got {pseudo_rate}")
    tiles = tuple(tiles)
    n_pseudo = pseudo_count(pseudo_rate, len(tiles))
    order = np.random.default_rng(seed).permutation(len(tiles))
    chosen = set(order[:n_pseudo].tolist())
    mixed = tuple(
        replace(t, label_source="pseudo" if i in chosen else "true") for i, t in enumerate(tiles)
    )
    return DatasetManifest(tiles=mixed, pseudo_rate=pseudo_rate, seed=seed)


class PackingWarning(UserWarning):
    """Fewer nuclei than requested could be placed."""


@dataclass(frozen=True)
class SynthConfig:
    height: int = 256
    width: int = 256
    nuclei: tuple[int, int] = (20, 40)
    axes: tuple[float, float] = (4.0, 12.0)  # semi-axis lengths, pixels
    nucleus_color: tuple[float, float, float] = (95.0, 60.0, 150.0)
    background_color: tuple[float, float, float] = (235.0, 190.0, 215.0)
    color_jitter: float = 12.0
    texture_sigma: float = 6.0
    debris: tuple[int, int] = (3, 8)  # unannotated dark blobs
    debris_axes: tuple[float, float] = (1.5, 4.0)
    faint_fraction: float = 0.1  # nuclei stained close to background
    overlap: str = "separate"  # or "allow"
    min_gap: int = 2
    max_attempts: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.axes[0] <= 0 or self.axes[1] < self.axes[0]:
            raise ValueError("axes must be a positive (min, max) range")
        if self.nuclei[0] < 0 or self.nuclei[1] < self.nuclei[0]:
            raise ValueError("nuclei must be a non-negative (min, max) range")
        if self.overlap not in ("separate", "allow"):
            raise ValueError("overlap must be 'separate' or 'allow'")
        if self.height < 1 or self.width < 1:
            raise ValueError("image dimensions must be positive")


@dataclass
class SynthTile:
    image: np.ndarray
    instances: np.ndarray
    points: np.ndarray
    seed: int
    warnings: list[str] = field(default_factory=list)


def _ellipse(shape, cx, cy, a, b, theta, margin: int = 0):
    """Rasterized filled ellipse as ``(window slices, local boolean mask)``.

    The window is the ellipse's bounding box grown by ``margin`` and clipped to
    the image; ``None`` if it misses the image entirely.
    """
    r = max(a, b)
    height, width = shape
    y0, y1 = max(0, int(math.floor(cy - r)) - margin), min(height, int(math.ceil(cy + r)) + margin + 1)
    x0, x1 = max(0, int(math.floor(cx - r)) - margin), min(width, int(math.ceil(cx + r)) + margin + 1)
    if y0 >= y1 or x0 >= x1:
        return None
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx, dy = xs - cx, ys - cy
    c, s = math.cos(theta), math.sin(theta)
    u = (dx * c + dy * s) / a
    v = (-dx * s + dy * c) / b
    return (slice(y0, y1), slice(x0, x1)), u * u + v * v <= 1.0


def _place(shape, blocked, cx, cy, a, b, theta, gap, min_gap):
    """Local ellipse window if it is non-empty and clear of ``blocked`` (after the gap)."""
    found = _ellipse(shape, cx, cy, a, b, theta, margin=min_gap)
    if found is None:
        return None
    window, blob = found
    if not blob.any():
        return None
    if blocked is not None and (ndimage.binary_dilation(blob, gap) & blocked[window]).any():
        return None
    return window, blob


def centroid_points(instances) -> np.ndarray:
    """Rounded pixel-mean centroid per instance (ascending id), snapped inside if needed."""
    centers = instance_centroids(instances)
    points = []
    for inst_id, (cx, cy) in sorted(centers.items()):
        x, y = round_half_down(cx), round_half_down(cy)
        if instances[y, x] != inst_id:
            ys, xs = np.nonzero(instances == inst_id)
            i = int(np.argmin((xs - cx) ** 2 + (ys - cy) ** 2))
            x, y = int(xs[i]), int(ys[i])
        points.append((x, y))
    return np.asarray(points, dtype=np.int64).reshape(-1, 2)


def synth_tile(cfg: SynthConfig) -> SynthTile:
    rng = np.random.default_rng(cfg.seed)
    shape = (cfg.height, cfg.width)
    target = int(rng.integers(cfg.nuclei[0], cfg.nuclei[1] + 1))
    instances = np.zeros(shape, dtype=np.int64)
    occupied = np.zeros(shape, dtype=bool)
    gap = np.ones((2 * cfg.min_gap + 1,) * 2, dtype=bool)
    placed = attempts = 0
    while placed < target and attempts < cfg.max_attempts * max(target, 1):
        attempts += 1
        a, b = rng.uniform(cfg.axes[0], cfg.axes[1], size=2)
        theta = rng.uniform(0.0, math.pi)
        r = max(a, b)
        cx = rng.uniform(r, cfg.width - 1 - r) if cfg.width - 1 > 2 * r else (cfg.width - 1) / 2
        cy = rng.uniform(r, cfg.height - 1 - r) if cfg.height - 1 > 2 * r else (cfg.height - 1) / 2
        blocked = occupied if cfg.overlap == "separate" else None
        found = _place(shape, blocked, cx, cy, a, b, theta, gap, cfg.min_gap)
        if found is None:
            continue
        window, blob = found
        placed += 1
        instances[window][blob & ~occupied[window]] = placed
        occupied[window] |= blob

    debris = np.zeros(shape, dtype=bool)
    n_debris = int(rng.integers(cfg.debris[0], cfg.debris[1] + 1))
    for _ in range(cfg.max_attempts * n_debris):
        if n_debris == 0:
            break
        a, b = rng.uniform(cfg.debris_axes[0], cfg.debris_axes[1], size=2)
        cx, cy = rng.uniform(0, cfg.width - 1), rng.uniform(0, cfg.height - 1)
        found = _place(shape, occupied | debris, cx, cy, a, b, rng.uniform(0.0, math.pi), gap, cfg.min_gap)
        if found is not None:
            window, blob = found
            debris[window] |= blob
            n_debris -= 1

    messages = []
    if placed < target:
        msg = f"placed {placed} of {target} nuclei after {attempts} attempts"
        warnings.warn(msg, PackingWarning, stacklevel=2)
        messages.append(msg)

    texture = ndimage.gaussian_filter(rng.normal(0.0, 1.0, shape), 2.0)
    texture *= cfg.texture_sigma / max(texture.std(), 1e-12)
    image = np.empty(shape + (3,), dtype=np.float64)
    image[:] = np.asarray(cfg.background_color)
    image += texture[..., None]
    nucleus = np.asarray(cfg.nucleus_color)
    for inst_id in range(1, placed + 1):
        tint = nucleus + rng.normal(0.0, cfg.color_jitter, 3)
        if rng.random() < cfg.faint_fraction:
            tint = 0.35 * tint + 0.65 * np.asarray(cfg.background_color)
        inside = instances == inst_id
        image[inside] = tint + 0.5 * texture[inside][:, None]
    image[debris] = nucleus * 0.8 + 0.5 * texture[debris][:, None]
    image = np.clip(np.rint(image), 0, 255).astype(np.uint8)

    # occlusion under "allow" can leave an id empty or split; keep ids contiguous
    if cfg.overlap == "allow":
        instances = relabel_sequential(instances)
    return SynthTile(
        image=image,
        instances=instances,
        points=centroid_points(instances),
        seed=cfg.seed,
        warnings=messages,
    )


def synth_corpus(cfg: SynthConfig, n_tiles: int = 1) -> list[SynthTile]:
    """``n_tiles`` tiles; tile ``i`` uses a seed derived from ``(cfg.seed, i)``."""
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_tiles)
    return [
        synth_tile(replace(cfg, seed=int(s.generate_state(1)[0]))) for s in seeds
    ]
