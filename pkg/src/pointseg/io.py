"""File formats: float rasters, masks, point lists, manifests, overlays.

Float raster container (little-endian)::

    b"NPNS" | u8 version=1 | u32 height | u32 width | u32 channels | f32 payload

Payload is row-major with channels interleaved. All writers go through
:func:`atomic_write` (temp file in the target directory, then rename).
"""

from __future__ import annotations

import colorsys
import io
import json
import os
import struct
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from PIL import Image

from ._validation import check_binary_mask, check_instance_map, check_points
from .datasets import DatasetManifest

MAGIC = b"NPNS"
VERSION = 1
_HEADER = struct.Struct("<4sBIII")


class FormatError(ValueError):
    """A file does not match the structure its reader expects."""


@contextmanager
def atomic_write(path, mode: str = "wb"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# float rasters ---------------------------------------------------------------


def encode_float_raster(array) -> bytes:
    array = np.asarray(array)
    if array.ndim == 2:
        array = array[..., None]
    if array.ndim != 3:
        raise ValueError(f"float raster must be (H, W) or (H, W, C), got {array.shape}")
    height, width, channels = array.shape
    payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, VERSION, height, width, channels) + payload


def decode_float_raster(data: bytes, squeeze: bool = True) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError(f"float raster: expected at least {_HEADER.size} header bytes, got {len(data)}")
    magic, version, height, width, channels = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"float raster: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"float raster: unsupported version {version}, expected {VERSION}")
    expected = height * width * channels * 4
    if len(data) - _HEADER.size != expected:
        raise FormatError(
            f"float raster: payload is {len(data) - _HEADER.size} bytes, "
            f"expected {expected} for {height}x{width}x{channels} float32"
        )
    array = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(height, width, channels)
    array = array.astype(np.float32)
    return array[..., 0] if squeeze and channels == 1 else array


def write_float_raster(path, array) -> None:
    with atomic_write(path) as fh:
        fh.write(encode_float_raster(array))


def read_float_raster(path, squeeze: bool = True) -> np.ndarray:
    return decode_float_raster(Path(path).read_bytes(), squeeze=squeeze)


# masks -----------------------------------------------------------------------


def _png_bytes(image: Image.Image) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def open_image(path) -> Image.Image:
    try:
        image = Image.open(path)
        image.load()
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: not a readable image file ({exc})") from exc
    return image


def write_mask(path, mask) -> None:
    """Binary mask as 8-bit PNG, 0 / 255."""
    mask = check_binary_mask(mask)
    with atomic_write(path) as fh:
        fh.write(_png_bytes(Image.fromarray(mask.astype(np.uint8) * 255)))


def read_mask(path) -> np.ndarray:
    array = np.asarray(open_image(path))
    if array.ndim != 2:
        raise FormatError(f"{path}: expected a single-channel mask image, got shape {array.shape}")
    values = np.unique(array)
    if not np.isin(values, (0, 1, 255)).all():
        raise FormatError(f"{path}: binary mask values must be 0/255, found {values[:5]}")
    return array > 0


def write_trimask(path, tri) -> None:
    tri = np.asarray(tri)
    if not np.isin(np.unique(tri), (0, 1, 2)).all():
        raise ValueError("trimask values must lie in {0, 1, 2}")
    with atomic_write(path) as fh:
        fh.write(_png_bytes(Image.fromarray(tri.astype(np.uint8))))


def read_trimask(path) -> np.ndarray:
    array = np.asarray(open_image(path))
    if array.ndim != 2 or not np.isin(np.unique(array), (0, 1, 2)).all():
        raise FormatError(f"{path}: expected 8-bit single-channel trimask with values {{0, 1, 2}}")
    return array.astype(np.uint8)


def write_instances(path, instances) -> None:
    """Instance map as 16-bit single-channel PNG (ids up to 65535)."""
    instances = check_instance_map(instances)
    if instances.size and instances.max() > 65535:
        raise ValueError(f"instance ids exceed 65535 (max {instances.max()})")
    image = Image.fromarray(instances.astype(np.uint16))
    with atomic_write(path) as fh:
        fh.write(_png_bytes(image))


def read_instances(path) -> np.ndarray:
    image = open_image(path)
    if image.mode not in ("I;16", "I", "L", "I;16B"):
        raise FormatError(f"{path}: expected a 16-bit single-channel instance image, got mode {image.mode}")
    return np.asarray(image).astype(np.int64)


def read_image(path) -> np.ndarray:
    """RGB tile as ``(H, W, 3)`` uint8."""
    return np.asarray(open_image(path).convert("RGB"))


def write_image(path, image) -> None:
    image = np.asarray(image, dtype=np.uint8)
    with atomic_write(path) as fh:
        fh.write(_png_bytes(Image.fromarray(image)))


# points ----------------------------------------------------------------------


def encode_points(points) -> str:
    points = check_points(points)
    return "x,y\n" + "".join(f"{x},{y}\n" for x, y in points)


def decode_points(text: str, source: str = "points") -> np.ndarray:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            pairs = json.loads(text)["points"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"{source}: expected a JSON object with a 'points' list of [x, y] pairs") from exc
        return check_points(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), name=source)
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or (lineno == 1 and line.replace(" ", "").lower() == "x,y"):
            continue
        parts = line.split(",")
        try:
            x, y = (int(p) for p in parts)
        except ValueError as exc:
            raise FormatError(f"{source}: line {lineno}: expected 'x,y' integers, got {line!r}") from exc
        rows.append((x, y))
    return check_points(np.asarray(rows, dtype=np.int64).reshape(-1, 2), name=source)


def write_points(path, points) -> None:
    path = Path(path)
    if path.suffix == ".json":
        text = json.dumps({"points": check_points(points).tolist()}) + "\n"
    else:
        text = encode_points(points)
    with atomic_write(path, "w") as fh:
        fh.write(text)


def read_points(path, shape=None) -> np.ndarray:
    points = decode_points(Path(path).read_text(), source=str(path))
    if shape is not None:
        check_points(points, shape, name=str(path))
    return points


# manifests -------------------------------------------------------------------


def write_manifest(path, manifest: DatasetManifest) -> None:
    with atomic_write(path, "w") as fh:
        fh.write(manifest.to_json())


def read_manifest(path) -> DatasetManifest:
    try:
        return DatasetManifest.from_json(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: manifest is not valid JSON ({exc})") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_json(path, payload: dict) -> None:
    with atomic_write(path, "w") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


# overlays --------------------------------------------------------------------


def instance_palette(n: int) -> np.ndarray:
    """``n`` distinct RGB colors, golden-ratio hue walk; row 0 is unused."""
    colors = np.zeros((n + 1, 3), dtype=np.uint8)
    for i in range(1, n + 1):
        hue = (i * 0.618033988749895) % 1.0
        colors[i] = np.round(np.array(colorsys.hsv_to_rgb(hue, 0.85, 0.95)) * 255)
    return colors


def render_overlay(image, instances, alpha: float = 0.45) -> np.ndarray:
    """Blend instance colors over the tile and draw instance outlines opaque."""
    image = np.asarray(image, dtype=np.float64)
    instances = check_instance_map(instances)
    palette = instance_palette(int(instances.max()) if instances.size else 0).astype(np.float64)
    colors = palette[instances]
    fg = instances > 0
    out = image.copy()
    out[fg] = (1 - alpha) * image[fg] + alpha * colors[fg]
    padded = np.pad(instances, 1, mode="edge")
    outline = fg & (
        (padded[:-2, 1:-1] != instances)
        | (padded[2:, 1:-1] != instances)
        | (padded[1:-1, :-2] != instances)
        | (padded[1:-1, 2:] != instances)
    )
    out[outline] = colors[outline]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
