"""8-bit RGB image container plus the color-space and distance primitives
shared by every perturbation operator.

Conventions used throughout the package:

* pixel data is row-major ``(height, width, 3)`` uint8,
* grayscale uses BT.601 luma weights (0.299, 0.587, 0.114),
* hue lives on a half-degree scale, i.e. in ``[0, 180)``, so integer hue
  shifts stay exact integer arithmetic,
* floating intermediates are rounded half-away-from-zero when stored back
  to 8 bits (:func:`quantize_u8`).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

from .errors import DimensionMismatchError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Round half away from zero and clamp to the 8-bit range."""
    arr = np.asarray(values, dtype=np.float64)
    return np.clip(np.floor(arr + 0.5), 0.0, 255.0).astype(np.uint8)


def _as_u8_array(pixels: np.ndarray, channels: int | None) -> np.ndarray:
    arr = np.asarray(pixels)
    expected_ndim = 2 if channels is None else 3
    if arr.ndim != expected_ndim or (channels and arr.shape[2] != channels):
        raise ValueError(f"expected shape (h, w{', 3' if channels else ''}), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image dimensions must be >= 1, got {arr.shape[:2]}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"pixel dtype must be integral, got {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("channel values must lie in [0, 255]")
    arr = np.array(arr, dtype=np.uint8, order="C")  # own the buffer
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Raster:
    """Immutable 8-bit RGB image. ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "pixels", _as_u8_array(self.pixels, 3))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    @classmethod
    def full(cls, width: int, height: int, color: tuple[int, int, int]) -> "Raster":
        return cls(np.full((height, width, 3), color, dtype=np.uint8))


@dataclass(frozen=True, eq=False)
class GrayRaster:
    """Immutable single-channel luma image, shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "pixels", _as_u8_array(self.pixels, None))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


class HsvPixel(NamedTuple):
    """HSV triple with hue on the half-degree scale.

    ``h`` is kept at float precision inside ``[0, 180)`` so that
    rgb -> hsv -> rgb round-trips are lossless; ``s`` and ``v`` are floats
    in ``[0, 255]``. Hue of achromatic pixels is 0 by convention.
    """

    h: float
    s: float
    v: float


def to_grayscale(img: Raster) -> GrayRaster:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B)."""
    px = img.pixels.astype(np.float64)
    luma = px[..., 0] * LUMA_WEIGHTS[0] + px[..., 1] * LUMA_WEIGHTS[1] + px[..., 2] * LUMA_WEIGHTS[2]
    return GrayRaster(quantize_u8(luma))


def hsv_planes_from_rgb(px: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized RGB -> HSV for a float (h, w, 3) array in [0, 255].

    Returns float planes (hue in [0, 180), saturation and value in [0, 255]).
    """
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    v = np.maximum(np.maximum(r, g), b)
    lo = np.minimum(np.minimum(r, g), b)
    delta = v - lo

    chromatic = delta > 0
    safe = np.where(chromatic, delta, 1.0)
    h_prime = np.zeros_like(v)
    is_r = chromatic & (v == r)
    is_g = chromatic & ~is_r & (v == g)
    is_b = chromatic & ~is_r & ~is_g
    h_prime = np.where(is_r, np.mod((g - b) / safe, 6.0), h_prime)
    h_prime = np.where(is_g, (b - r) / safe + 2.0, h_prime)
    h_prime = np.where(is_b, (r - g) / safe + 4.0, h_prime)
    h = np.mod(h_prime * 30.0, 180.0)  # 60 deg per sector, halved scale

    s = np.where(v > 0, 255.0 * delta / np.where(v > 0, v, 1.0), 0.0)
    return h, s, v.astype(np.float64)


def rgb_planes_from_hsv(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB; inverse of :func:`hsv_planes_from_rgb`.

    Returns a quantized uint8 (h, w, 3) array.
    """
    h_prime = np.mod(h, 180.0) / 30.0  # back to [0, 6)
    c = v * s / 255.0
    x = c * (1.0 - np.abs(np.mod(h_prime, 2.0) - 1.0))
    m = v - c

    sector = np.floor(h_prime).astype(np.int64) % 6
    zeros = np.zeros_like(c)
    # per-sector (r', g', b') before adding m
    r_by_sector = np.stack([c, x, zeros, zeros, x, c])
    g_by_sector = np.stack([x, c, c, x, zeros, zeros])
    b_by_sector = np.stack([zeros, zeros, x, c, c, x])
    idx = sector[None, ...]
    r = np.take_along_axis(r_by_sector, idx, axis=0)[0]
    g = np.take_along_axis(g_by_sector, idx, axis=0)[0]
    b = np.take_along_axis(b_by_sector, idx, axis=0)[0]
    rgb = np.stack([r + m, g + m, b + m], axis=-1)
    return quantize_u8(rgb)


def rgb_to_hsv(px: tuple[int, int, int]) -> HsvPixel:
    """Convert one (r, g, b) pixel (each 0..255) to :class:`HsvPixel`."""
    arr = np.asarray(px, dtype=np.float64).reshape(1, 1, 3)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("channel values must lie in [0, 255]")
    h, s, v = hsv_planes_from_rgb(arr)
    return HsvPixel(float(h[0, 0]), float(s[0, 0]), float(v[0, 0]))


def hsv_to_rgb(px: HsvPixel) -> tuple[int, int, int]:
    """Convert an :class:`HsvPixel` back to an (r, g, b) uint8 triple."""
    h = np.asarray([[px.h]], dtype=np.float64)
    s = np.asarray([[px.s]], dtype=np.float64)
    v = np.asarray([[px.v]], dtype=np.float64)
    rgb = rgb_planes_from_hsv(h, s, v)[0, 0]
    return int(rgb[0]), int(rgb[1]), int(rgb[2])


def mean_abs_error(a: Raster, b: Raster) -> float:
    """Mean absolute difference over all pixels and channels."""
    if a.size != b.size:
        raise DimensionMismatchError(f"size mismatch: {a.size} vs {b.size}")
    da = a.pixels.astype(np.float64)
    db = b.pixels.astype(np.float64)
    return float(np.mean(np.abs(da - db)))


def resize_bilinear(img: Raster, width: int, height: int) -> Raster:
    """Resize with bilinear interpolation (pixel-center alignment, edge clamp)."""
    if width < 1 or height < 1:
        raise ValueError("target dimensions must be >= 1")
    src = img.pixels.astype(np.float64)
    h, w = src.shape[:2]

    xs = (np.arange(width) + 0.5) * (w / width) - 0.5
    ys = (np.arange(height) + 0.5) * (h / height) - 0.5
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0
    x0i = np.clip(x0.astype(np.int64), 0, w - 1)
    x1i = np.clip(x0.astype(np.int64) + 1, 0, w - 1)
    y0i = np.clip(y0.astype(np.int64), 0, h - 1)
    y1i = np.clip(y0.astype(np.int64) + 1, 0, h - 1)

    rows = src[y0i] * (1.0 - fy)[:, None, None] + src[y1i] * fy[:, None, None]
    out = rows[:, x0i] * (1.0 - fx)[None, :, None] + rows[:, x1i] * fx[None, :, None]
    return Raster(quantize_u8(out))


def read_image(path: str | Path) -> Raster:
    """Decode a PNG or JPEG file into an RGB raster."""
    with Image.open(path) as im:
        return Raster(np.asarray(im.convert("RGB")))


def write_png(img: Raster, path: str | Path) -> None:
    Image.fromarray(img.pixels).save(path, format="PNG")


def encode_png(img: Raster) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.pixels).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> Raster:
    with Image.open(io.BytesIO(data)) as im:
        return Raster(np.asarray(im.convert("RGB")))
