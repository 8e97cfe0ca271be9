"""Concept key-value perturbation operators, their registry, plan
composition, and the numerical commutativity (CUCO) check.

The default registry holds 12 operators. Plans select a subset as a binary
vector over the registry order; :func:`compose` applies the selection in a
fixed canonical order (geometry, then groove/surface removal, then smoothing,
then hue tuning) so that plan -> image is a well-defined function, and
:func:`cuco_score` quantifies how much that ordering actually matters.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DegenerateRemovalWarning, RegistryMismatchError, UnknownOperatorError
from .raster import Raster, hsv_planes_from_rgb, mean_abs_error, quantize_u8, rgb_planes_from_hsv
from .segmentation import BinaryMask, SegmentationParams, segment_grooves

CONCEPT_COLOR = "Color"
CONCEPT_TEXTURE = "Texture"
CONCEPT_SHAPE = "Shape"
CONCEPT_GROOVE_SURFACE = "GrooveSurface"

BILATERAL_DIAMETER = 9


@dataclass(frozen=True)
class OperatorSpec:
    """One concept key-value operator.

    ``apply_rank`` orders canonical application: geometry first, region
    removal second, photometric operators last.
    """

    id: str
    concept: str
    key: str
    value: int | str
    apply_rank: int


def _default_specs() -> tuple[OperatorSpec, ...]:
    return (
        OperatorSpec("tune_5", CONCEPT_COLOR, "Tune", 5, 10),
        OperatorSpec("tune_10", CONCEPT_COLOR, "Tune", 10, 11),
        OperatorSpec("smooth_150", CONCEPT_TEXTURE, "Smooth", 150, 8),
        OperatorSpec("smooth_300", CONCEPT_TEXTURE, "Smooth", 300, 9),
        OperatorSpec("flip_h", CONCEPT_SHAPE, "Flip", "horizontal", 0),
        OperatorSpec("flip_v", CONCEPT_SHAPE, "Flip", "vertical", 1),
        OperatorSpec("rotate_+30", CONCEPT_SHAPE, "Rotate", 30, 2),
        OperatorSpec("rotate_-30", CONCEPT_SHAPE, "Rotate", -30, 3),
        OperatorSpec("rotate_+90", CONCEPT_SHAPE, "Rotate", 90, 4),
        OperatorSpec("rotate_-90", CONCEPT_SHAPE, "Rotate", -90, 5),
        OperatorSpec("groove_remove", CONCEPT_GROOVE_SURFACE, "Groove", "remove", 6),
        OperatorSpec("surface_remove", CONCEPT_GROOVE_SURFACE, "Surface", "remove", 7),
    )


@dataclass(frozen=True)
class OperatorRegistry:
    """Ordered, immutable operator collection; order defines plan bit layout."""

    specs: tuple[OperatorSpec, ...] = field(default_factory=_default_specs)

    def __post_init__(self) -> None:
        ids = [s.id for s in self.specs]
        if len(set(ids)) != len(ids):
            raise ValueError("operator ids must be unique")
        triples = [(s.concept, s.key, s.value) for s in self.specs]
        if len(set(triples)) != len(triples):
            raise ValueError("(concept, key, value) triples must be unique")

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self) -> Iterator[OperatorSpec]:
        return iter(self.specs)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.specs)

    def index_of(self, op_id: str) -> int:
        for i, s in enumerate(self.specs):
            if s.id == op_id:
                return i
        raise UnknownOperatorError(f"unknown operator {op_id!r}; valid ids: {', '.join(self.ids)}")

    def spec(self, op_id: str) -> OperatorSpec:
        return self.specs[self.index_of(op_id)]


def default_registry() -> OperatorRegistry:
    return OperatorRegistry()


@dataclass(frozen=True)
class PerturbationPlan:
    """Binary inclusion vector over a registry (1 = operator applied)."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("plan bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def count(self) -> int:
        return sum(self.bits)

    @classmethod
    def empty(cls, registry: OperatorRegistry) -> "PerturbationPlan":
        return cls((0,) * len(registry))

    @classmethod
    def from_ids(cls, registry: OperatorRegistry, op_ids: Sequence[str]) -> "PerturbationPlan":
        bits = [0] * len(registry)
        for op_id in op_ids:
            bits[registry.index_of(op_id)] = 1
        return cls(tuple(bits))

    def operator_ids(self, registry: OperatorRegistry) -> tuple[str, ...]:
        if len(self.bits) != len(registry):
            raise RegistryMismatchError(f"plan length {len(self.bits)} != registry size {len(registry)}")
        return tuple(s.id for bit, s in zip(self.bits, registry) if bit)


def hue_shift(img: Raster, delta: float) -> Raster:
    """Shift every pixel's hue by ``delta`` half-degrees, modulo 180."""
    h, s, v = hsv_planes_from_rgb(img.pixels.astype(np.float64))
    return Raster(rgb_planes_from_hsv(np.mod(h + delta, 180.0), s, v))


def bilateral_smooth(img: Raster, sigma: float, diameter: int = BILATERAL_DIAMETER) -> Raster:
    """Edge-preserving smoothing: Gaussian in space and in RGB distance.

    ``sigma`` is used for both the spatial and the color term. Weights are
    renormalized over in-frame neighbors, so constant images pass through
    exactly.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = diameter // 2
    src = img.pixels.astype(np.float64)
    h, w = src.shape[:2]
    num = np.zeros_like(src)
    den = np.zeros((h, w), dtype=np.float64)
    inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma)

    for dy in range(-radius, radius + 1):
        ys0, ys1 = max(0, dy), min(h, h + dy)      # slice of src rows shifted by dy
        yd0, yd1 = max(0, -dy), min(h, h - dy)
        for dx in range(-radius, radius + 1):
            xs0, xs1 = max(0, dx), min(w, w + dx)
            xd0, xd1 = max(0, -dx), min(w, w - dx)
            shifted = src[ys0:ys1, xs0:xs1]
            center = src[yd0:yd1, xd0:xd1]
            spatial = np.exp(-(dx * dx + dy * dy) * inv_two_sigma2)
            color2 = np.sum((shifted - center) ** 2, axis=-1)
            weight = spatial * np.exp(-color2 * inv_two_sigma2)
            num[yd0:yd1, xd0:xd1] += weight[..., None] * shifted
            den[yd0:yd1, xd0:xd1] += weight
    return Raster(quantize_u8(num / den[..., None]))


def flip(img: Raster, axis: str) -> Raster:
    """Mirror the image; ``horizontal`` swaps left/right, ``vertical`` top/bottom."""
    if axis == "horizontal":
        return Raster(np.fliplr(img.pixels))
    if axis == "vertical":
        return Raster(np.flipud(img.pixels))
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def _rotate_quarter(px: np.ndarray, degrees: int) -> np.ndarray:
    # exact pixel permutation, centered on a same-size black canvas
    k = 1 if degrees == 90 else 3
    rotated = np.rot90(px, k=k)
    h, w = px.shape[:2]
    rh, rw = rotated.shape[:2]
    out = np.zeros_like(px)
    dy, dx = (h - rh) // 2, (w - rw) // 2
    sy, sx = max(0, -dy), max(0, -dx)
    ty, tx = max(0, dy), max(0, dx)
    copy_h = min(rh - sy, h - ty)
    copy_w = min(rw - sx, w - tx)
    out[ty:ty + copy_h, tx:tx + copy_w] = rotated[sy:sy + copy_h, sx:sx + copy_w]
    return out


def _rotate_bilinear(px: np.ndarray, degrees: float) -> np.ndarray:
    h, w = px.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xx - cx
    dy = yy - cy
    # inverse map; matches the quarter-turn permutation at +/-90 on square canvases
    sx = cos_t * dx - sin_t * dy + cx
    sy = sin_t * dx + cos_t * dy + cy

    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    fx = np.clip(sx - x0, 0.0, 1.0)[..., None]
    fy = np.clip(sy - y0, 0.0, 1.0)[..., None]

    src = px.astype(np.float64)
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    out[~inside] = 0.0
    return quantize_u8(out)


def rotate(img: Raster, degrees: int) -> Raster:
    """Rotate about the image center onto a same-size canvas.

    Positive angles turn counterclockwise in the rendered image. Quarter
    turns are exact pixel permutations (clipped for non-square canvases);
    +/-30 uses bilinear resampling. Uncovered pixels are filled black.
    """
    if degrees in (90, -90):
        return Raster(_rotate_quarter(img.pixels, degrees))
    if degrees in (30, -30):
        return Raster(_rotate_bilinear(img.pixels, degrees))
    raise ValueError(f"degrees must be one of -90, -30, 30, 90, got {degrees}")


def remove_region(img: Raster, mask: BinaryMask, which: str) -> Raster:
    """Replace the groove (or surface) region by the kept region's mean color.

    If the kept region is empty the image is returned unchanged and a
    :class:`DegenerateRemovalWarning` is emitted.
    """
    if (mask.width, mask.height) != (img.width, img.height):
        raise ValueError(f"mask size {(mask.width, mask.height)} != image size {img.size}")
    if which == "groove":
        region = mask.bits
    elif which == "surface":
        region = ~mask.bits
    else:
        raise ValueError(f"which must be 'groove' or 'surface', got {which!r}")

    keep = ~region
    if not keep.any():
        warnings.warn(f"{which} removal would erase the whole image; returning it unchanged",
                      DegenerateRemovalWarning, stacklevel=2)
        return img
    if not region.any():
        return img
    fill = quantize_u8(img.pixels[keep].mean(axis=0))
    return Raster(np.where(region[..., None], fill, img.pixels))


def apply_operator(
    img: Raster,
    spec: OperatorSpec,
    seg_params: SegmentationParams = SegmentationParams(),
    mask: BinaryMask | None = None,
) -> Raster:
    """Apply one operator as a standalone unary function.

    Groove/surface removal segments ``img`` on the spot unless ``mask`` is
    supplied (compose passes a shared pre-removal mask).
    """
    if spec.key == "Tune":
        return hue_shift(img, float(spec.value))
    if spec.key == "Smooth":
        return bilateral_smooth(img, float(spec.value))
    if spec.key == "Flip":
        return flip(img, str(spec.value))
    if spec.key == "Rotate":
        return rotate(img, int(spec.value))
    if spec.key in ("Groove", "Surface"):
        if mask is None:
            mask = segment_grooves(img, seg_params)
        return remove_region(img, mask, which=spec.key.lower())
    raise UnknownOperatorError(f"no implementation for operator key {spec.key!r}")


def compose(
    img: Raster,
    plan: PerturbationPlan,
    registry: OperatorRegistry | None = None,
    seg_params: SegmentationParams = SegmentationParams(),
) -> Raster:
    """Apply the plan's operators in canonical order.

    The groove mask is computed once, on the image state right before the
    first removal (i.e. after geometry), and shared by both removal
    operators.
    """
    registry = registry or default_registry()
    if len(plan) != len(registry):
        raise RegistryMismatchError(f"plan length {len(plan)} != registry size {len(registry)}")
    selected = [s for bit, s in zip(plan.bits, registry) if bit]
    selected.sort(key=lambda s: s.apply_rank)

    out = img
    mask: BinaryMask | None = None
    for spec in selected:
        if spec.key in ("Groove", "Surface") and mask is None:
            mask = segment_grooves(out, seg_params)
        out = apply_operator(out, spec, seg_params, mask=mask)
    return out


def cuco_score(
    img: Raster,
    plan: PerturbationPlan,
    n_orders: int = 5,
    seed: int = 0,
    registry: OperatorRegistry | None = None,
    seg_params: SegmentationParams = SegmentationParams(),
) -> float:
    """Mean pairwise MAE across random application orders of the plan.

    0 means the selected operators commute exactly on this image; each
    operator is applied as a standalone unary function, so removal operators
    re-segment whatever image state they receive.
    """
    registry = registry or default_registry()
    selected = [s for bit, s in zip(plan.bits, registry) if bit]
    if len(selected) < 2:
        raise ValueError(f"need at least 2 selected operators, got {len(selected)}")
    if n_orders < 2:
        raise ValueError(f"need at least 2 orders, got {n_orders}")

    rng = np.random.default_rng(seed)
    outputs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateRemovalWarning)
        for _ in range(n_orders):
            out = img
            for idx in rng.permutation(len(selected)):
                out = apply_operator(out, selected[idx], seg_params)
            outputs.append(out)
    pairs = list(itertools.combinations(outputs, 2))
    return float(np.mean([mean_abs_error(a, b) for a, b in pairs]))
