"""Synthetic texture corpus generator with planted concept rankings.

Each kind is built so the matching builtin scorer has a known, analytic
dependence on the operators, which makes the planted ranking a genuine
ground truth at desk scale:

* ``stripes``: sinusoidal bands (default vertical) with a gentle cross-band
  luma ramp, so orientation dominates, groove structure matters some, and
  smoothing barely registers.
* ``grooves``: dark blobs on a light field; removing grooves flattens the
  luma spread.
* ``gradient``: a smooth ramp with fine speckle; smoothing is the one
  operator with a clear effect.
* ``hue``: constant-hue fields (with same-hue luma blotches so segmentation
  stays well-defined); only hue tuning moves a hue-keyed scorer.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .concepts import ConceptRanking
from .evaluation import GroundTruthRecord, write_ground_truth
from .raster import Raster, rgb_planes_from_hsv, write_png
from .segmentation import BinaryMask

KINDS = ("stripes", "grooves", "gradient", "hue")

PLANTED_RANKINGS: dict[str, tuple[str, ...]] = {
    "stripes": ("vertical_stripped", "furrow", "rugged", "plated", "smooth"),
    "grooves": ("rugged", "furrow", "plated", "vertical_stripped", "smooth"),
    "gradient": ("smooth", "plated", "vertical_stripped", "rugged", "furrow"),
    "hue": ("smooth", "plated", "vertical_stripped", "rugged", "furrow"),
}

# stripe canvases are non-square on purpose: quarter-turn rotations then clip,
# which keeps their effect on orientation statistics finite instead of a pure
# energy swap, the regime where linear surrogates stay informative
STRIPE_ASPECT = 11 / 16


def stripe_canvas(size: int) -> tuple[int, int]:
    return size, max(8, round(size * STRIPE_ASPECT))


def _colorize(value: np.ndarray, hue: float, sat: float) -> Raster:
    """Render a luma-like value plane as a constant-hue RGB image."""
    h = np.full(value.shape, hue, dtype=np.float64)
    s = np.full(value.shape, sat, dtype=np.float64)
    return Raster(rgb_planes_from_hsv(h, s, np.clip(value, 0.0, 255.0)))


@dataclass(frozen=True)
class StripeImage:
    raster: Raster
    groove_mask: BinaryMask  # ground truth: pixels drawn darker than the mid level


def make_stripes(
    size: int = 64,
    rng: np.random.Generator | None = None,
    orientation: str = "vertical",
) -> StripeImage:
    """Sinusoidal stripes plus a faint luma ramp across the stripe direction."""
    if orientation not in ("vertical", "horizontal"):
        raise ValueError(f"orientation must be vertical|horizontal, got {orientation!r}")
    rng = rng or np.random.default_rng(0)
    w_img, h_img = stripe_canvas(size)
    if orientation == "horizontal":
        w_img, h_img = h_img, w_img
    extent = w_img if orientation == "vertical" else h_img
    # period and phase put both borders at wave extrema, so band edges stay
    # a quarter period away from the frame and morphological closing (whose
    # erosion treats the outside as set) cannot glue bands to the border
    period = 2.0 * (extent - 1) / 5.0
    phase = float(rng.choice((0.5, 1.5))) * np.pi + rng.uniform(-0.05, 0.05)
    mid = rng.uniform(125.0, 145.0)
    amp = rng.uniform(50.0, 60.0)
    ramp_swing = rng.uniform(10.0, 14.0)
    hue = rng.uniform(12.0, 24.0)
    sat = rng.uniform(90.0, 140.0)

    yy, xx = np.mgrid[0:h_img, 0:w_img].astype(np.float64)
    along = xx if orientation == "vertical" else yy
    across = yy if orientation == "vertical" else xx
    across_max = h_img - 1 if orientation == "vertical" else w_img - 1
    wave = np.sin(2.0 * np.pi * along / period + phase)
    relief = amp * wave + ramp_swing * (across / across_max - 0.5)
    return StripeImage(raster=_colorize(mid + relief, hue, sat), groove_mask=BinaryMask(relief < 0))


def make_grooves(size: int = 64, rng: np.random.Generator | None = None) -> Raster:
    """Dark elliptical blobs (grooves) on a light field."""
    rng = rng or np.random.default_rng(0)
    field = rng.uniform(180.0, 200.0)
    blob = rng.uniform(75.0, 95.0)
    hue = rng.uniform(12.0, 24.0)
    sat = rng.uniform(80.0, 120.0)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    value = np.full((size, size), field)
    for _ in range(rng.integers(4, 8)):
        cy, cx = rng.uniform(0, size, size=2)
        ry = rng.uniform(size / 10.0, size / 5.0)
        rx = rng.uniform(size / 10.0, size / 5.0)
        inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        value[inside] = blob
    return _colorize(value, hue, sat)


def make_gradient(size: int = 64, rng: np.random.Generator | None = None) -> Raster:
    """Low-frequency luma ramp with fine speckle for smoothing to remove."""
    rng = rng or np.random.default_rng(0)
    lo = rng.uniform(110.0, 130.0)
    hi = rng.uniform(170.0, 190.0)
    hue = rng.uniform(12.0, 24.0)
    sat = rng.uniform(60.0, 100.0)
    angle = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    t = (np.cos(angle) * xx + np.sin(angle) * yy) / (size - 1)
    t = (t - t.min()) / (t.max() - t.min())
    value = lo + (hi - lo) * t + rng.normal(0.0, 4.0, size=(size, size))
    return _colorize(value, hue, sat)


def make_hue_field(size: int = 64, rng: np.random.Generator | None = None) -> Raster:
    """Constant-hue field with a few darker luma blotches.

    Hue is drawn away from the modulo-180 wrap. The blotches share the
    field's hue; they exist so groove segmentation stays well-defined when
    removal operators run inside composed plans (the fills they produce then
    also carry the field's hue).
    """
    rng = rng or np.random.default_rng(0)
    hue = rng.uniform(25.0, 145.0)
    sat = rng.uniform(140.0, 200.0)
    val = rng.uniform(150.0, 220.0)
    plane = np.full((size, size), val)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    for _ in range(int(rng.integers(3, 6))):
        cy, cx = rng.uniform(0, size, size=2)
        ry = rng.uniform(size / 8.0, size / 5.0)
        rx = rng.uniform(size / 8.0, size / 5.0)
        inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        plane[inside] = val * 0.5
    return _colorize(plane, hue, sat)


def make_texture(kind: str, size: int, rng: np.random.Generator, orientation: str = "vertical") -> Raster:
    if kind == "stripes":
        return make_stripes(size, rng, orientation).raster
    if kind == "grooves":
        return make_grooves(size, rng)
    if kind == "gradient":
        return make_gradient(size, rng)
    if kind == "hue":
        return make_hue_field(size, rng)
    raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


def generate_corpus(
    out_dir: str | Path,
    kind: str,
    n: int,
    size: int = 64,
    seed: int = 0,
    orientation: str = "vertical",
) -> Path:
    """Write ``n`` PNGs plus a manifest CSV with the planted rankings.

    Image i is drawn from substream (seed, i), so the corpus is reproducible
    image-by-image. Returns the manifest path.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ranking = ConceptRanking.from_order(PLANTED_RANKINGS[kind])
    records = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        img = make_texture(kind, size, rng, orientation)
        name = f"{kind}_{i:04d}.png"
        write_png(img, out / name)
        records.append(GroundTruthRecord(path=name, label=kind, ranking=ranking))
    manifest = out / "manifest.csv"
    write_ground_truth(records, manifest)
    return manifest
