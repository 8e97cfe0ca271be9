import math

import numpy as np
import pytest

import texplain as tx
from texplain.operators import OperatorSpec, default_registry
from texplain.raster import quantize_u8, rgb_planes_from_hsv
from texplain.segmentation import BinaryMask


def hsv_image(h, s, v, shape=(12, 16)):
    plane = np.full(shape, float(v))
    return tx.Raster(rgb_planes_from_hsv(np.full(shape, float(h)), np.full(shape, float(s)), plane))


class TestRegistry:
    def test_default_ids_and_order(self):
        assert default_registry().ids == (
            "tune_5", "tune_10", "smooth_150", "smooth_300", "flip_h", "flip_v",
            "rotate_+30", "rotate_-30", "rotate_+90", "rotate_-90",
            "groove_remove", "surface_remove",
        )

    def test_duplicate_id_rejected(self):
        spec = OperatorSpec("x", "Color", "Tune", 5, 0)
        with pytest.raises(ValueError):
            tx.OperatorRegistry((spec, spec))

    def test_unknown_id(self):
        with pytest.raises(tx.UnknownOperatorError):
            default_registry().index_of("tune_7")

    def test_plan_from_ids(self):
        reg = default_registry()
        plan = tx.PerturbationPlan.from_ids(reg, ["flip_h", "tune_5"])
        assert plan.count == 2
        assert plan.operator_ids(reg) == ("tune_5", "flip_h")


class TestHueShift:
    def test_modular_wrap(self):
        img = hsv_image(178, 200, 220)
        out = tx.hue_shift(img, 5)
        from texplain.raster import hsv_planes_from_rgb

        h, _, _ = hsv_planes_from_rgb(out.pixels.astype(np.float64))
        assert abs(h.mean() - 3.0) < 0.6

    def test_zero_delta_identity(self, random_image):
        assert tx.mean_abs_error(tx.hue_shift(random_image, 0), random_image) <= 1.0

    def test_achromatic_invariance(self):
        gray = tx.Raster.full(8, 8, (90, 90, 90))
        assert tx.mean_abs_error(tx.hue_shift(gray, 37), gray) <= 1.0

    def test_inverse_shift_via_wraparound(self, random_image):
        # +5 then +175 = +180 = 0 mod 180
        back = tx.hue_shift(tx.hue_shift(random_image, 5), 175)
        assert tx.mean_abs_error(back, random_image) <= 1.0


def reference_bilateral(px, sigma, radius=4):
    """Dense double-loop bilateral filter; the independent oracle."""
    src = px.astype(np.float64)
    h, w, _ = src.shape
    out = np.zeros_like(src)
    for y in range(h):
        for x in range(w):
            acc = np.zeros(3)
            norm = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy, xx = y + dy, x + dx
                    if not (0 <= yy < h and 0 <= xx < w):
                        continue
                    diff = src[yy, xx] - src[y, x]
                    weight = math.exp(-(dx * dx + dy * dy) / (2 * sigma * sigma))
                    weight *= math.exp(-float(diff @ diff) / (2 * sigma * sigma))
                    acc += weight * src[yy, xx]
                    norm += weight
            out[y, x] = acc / norm
    return out


def reference_gaussian(px, sigma, radius=4):
    src = px.astype(np.float64)
    h, w, _ = src.shape
    out = np.zeros_like(src)
    for y in range(h):
        for x in range(w):
            acc = np.zeros(3)
            norm = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy, xx = y + dy, x + dx
                    if not (0 <= yy < h and 0 <= xx < w):
                        continue
                    weight = math.exp(-(dx * dx + dy * dy) / (2 * sigma * sigma))
                    acc += weight * src[yy, xx]
                    norm += weight
            out[y, x] = acc / norm
    return out


class TestBilateral:
    def test_constant_exact(self):
        img = tx.Raster.full(20, 14, (37, 81, 164))
        assert np.array_equal(tx.bilateral_smooth(img, 150).pixels, img.pixels)

    def test_matches_reference(self, rng):
        px = rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8)
        for sigma in (150.0, 300.0):
            ref = reference_bilateral(px, sigma)
            got = tx.bilateral_smooth(tx.Raster(px), sigma).pixels
            assert np.abs(got.astype(np.float64) - ref).max() <= 0.51

    def test_denoises_salt_and_pepper(self, rng):
        clean = np.full((16, 16, 3), 128, dtype=np.uint8)
        noisy = clean.copy()
        idx = rng.choice(256, size=20, replace=False)
        noisy.reshape(-1, 3)[idx[:10]] = 255
        noisy.reshape(-1, 3)[idx[10:]] = 0
        before = tx.mean_abs_error(tx.Raster(noisy), tx.Raster(clean))
        # expected improvement frozen from the dense reference filter
        expected = quantize_u8(reference_bilateral(noisy, 150.0))
        ref_after = np.abs(expected.astype(float) - clean.astype(float)).mean()
        got = tx.bilateral_smooth(tx.Raster(noisy), 150.0)
        after = tx.mean_abs_error(got, tx.Raster(clean))
        assert after < before
        assert after == pytest.approx(ref_after, abs=0.02)

    def test_preserves_step_edge_better_than_gaussian(self):
        px = np.zeros((16, 16, 3), dtype=np.uint8)
        px[:, 8:, :] = 255
        sigma = 150.0
        bil = tx.bilateral_smooth(tx.Raster(px), sigma).pixels.astype(np.float64)
        gau = quantize_u8(reference_gaussian(px, sigma)).astype(np.float64)
        src = px.astype(np.float64)
        for col in (7, 8):  # edge-adjacent columns
            move_bil = np.abs(bil[:, col] - src[:, col]).mean()
            move_gau = np.abs(gau[:, col] - src[:, col]).mean()
            assert move_bil < move_gau

    def test_rejects_nonpositive_sigma(self, random_image):
        with pytest.raises(ValueError):
            tx.bilateral_smooth(random_image, 0)


class TestFlip:
    def test_involution(self, random_image):
        twice = tx.flip(tx.flip(random_image, "horizontal"), "horizontal")
        assert np.array_equal(twice.pixels, random_image.pixels)

    def test_index_map(self, random_image):
        out = tx.flip(random_image, "horizontal")
        w = random_image.width
        assert tuple(out.pixels[0, w - 1]) == tuple(random_image.pixels[0, 0])

    def test_flips_commute(self, random_image):
        a = tx.flip(tx.flip(random_image, "horizontal"), "vertical")
        b = tx.flip(tx.flip(random_image, "vertical"), "horizontal")
        assert np.array_equal(a.pixels, b.pixels)

    def test_bad_axis(self, random_image):
        with pytest.raises(ValueError):
            tx.flip(random_image, "diagonal")


class TestRotate:
    def test_square_quarter_turn_roundtrip(self, rng):
        img = tx.Raster(rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8))
        back = tx.rotate(tx.rotate(img, 90), -90)
        assert np.array_equal(back.pixels, img.pixels)

    def test_thirty_roundtrip_interior(self, stripe_image):
        back = tx.rotate(tx.rotate(stripe_image, 30), -30)
        h, w = stripe_image.height, stripe_image.width
        yy, xx = np.mgrid[0:h, 0:w]
        radius = 0.4 * min(w, h)
        disk = (yy - (h - 1) / 2) ** 2 + (xx - (w - 1) / 2) ** 2 <= radius ** 2
        err = np.abs(back.pixels.astype(float) - stripe_image.pixels.astype(float))[disk]
        assert err.mean() <= 5.0

    def test_nonsquare_quarter_turn_clips_black(self):
        img = tx.Raster.full(20, 12, (200, 130, 90))
        out = tx.rotate(img, 90)
        assert out.size == img.size
        assert tuple(out.pixels[0, 0]) == (0, 0, 0)
        assert tuple(out.pixels[-1, -1]) == (0, 0, 0)
        assert tuple(out.pixels[6, 10]) == (200, 130, 90)

    def test_thirty_produces_black_corners(self, stripe_image):
        out = tx.rotate(stripe_image, 30)
        assert tuple(out.pixels[0, 0]) == (0, 0, 0)

    def test_rejects_other_angles(self, random_image):
        with pytest.raises(ValueError):
            tx.rotate(random_image, 45)


class TestRemoveRegion:
    def test_empty_mask_noop(self, random_image):
        mask = BinaryMask(np.zeros((random_image.height, random_image.width), dtype=bool))
        out = tx.remove_region(random_image, mask, "groove")
        assert np.array_equal(out.pixels, random_image.pixels)

    def test_full_mask_degenerate_warning(self, random_image):
        mask = BinaryMask(np.ones((random_image.height, random_image.width), dtype=bool))
        with pytest.warns(tx.DegenerateRemovalWarning):
            out = tx.remove_region(random_image, mask, "groove")
        assert np.array_equal(out.pixels, random_image.pixels)

    def test_fill_is_mean_of_kept(self):
        px = np.zeros((4, 8, 3), dtype=np.uint8)
        px[:, :4] = (40, 50, 60)    # grooves
        px[:, 4:] = (201, 101, 51)  # surface
        mask = BinaryMask(np.pad(np.ones((4, 4), dtype=bool), ((0, 0), (0, 4))))
        out = tx.remove_region(tx.Raster(px), mask, "groove")
        assert (out.pixels[:, :4] == np.array([201, 101, 51], dtype=np.uint8)).all()
        assert (out.pixels[:, 4:] == px[:, 4:]).all()

    def test_surface_removal_fills_complement(self):
        px = np.zeros((4, 8, 3), dtype=np.uint8)
        px[:, :4] = (40, 50, 60)
        px[:, 4:] = (200, 100, 50)
        mask = BinaryMask(np.pad(np.ones((4, 4), dtype=bool), ((0, 0), (0, 4))))
        out = tx.remove_region(tx.Raster(px), mask, "surface")
        assert (out.pixels[:, 4:] == np.array([40, 50, 60], dtype=np.uint8)).all()
        assert (out.pixels[:, :4] == px[:, :4]).all()

    def test_dimension_mismatch(self, random_image):
        with pytest.raises(ValueError):
            tx.remove_region(random_image, BinaryMask(np.zeros((2, 2), dtype=bool)), "groove")


class TestCompose:
    def test_empty_plan_identity(self, random_image):
        reg = default_registry()
        out = tx.compose(random_image, tx.PerturbationPlan.empty(reg))
        assert tx.mean_abs_error(out, random_image) == 0.0

    def test_singleton_equals_operator(self, random_image):
        reg = default_registry()
        plan = tx.PerturbationPlan.from_ids(reg, ["flip_h"])
        assert np.array_equal(tx.compose(random_image, plan).pixels,
                              tx.flip(random_image, "horizontal").pixels)

    def test_both_flips_are_half_turn(self, random_image):
        reg = default_registry()
        plan = tx.PerturbationPlan.from_ids(reg, ["flip_h", "flip_v"])
        out = tx.compose(random_image, plan)
        assert np.array_equal(out.pixels, np.rot90(random_image.pixels, k=2))

    def test_deterministic(self, stripe_image):
        reg = default_registry()
        plan = tx.PerturbationPlan.from_ids(reg, ["rotate_+30", "groove_remove", "smooth_150", "tune_5"])
        a = tx.compose(stripe_image, plan).pixels
        b = tx.compose(stripe_image, plan).pixels
        assert np.array_equal(a, b)

    def test_plan_length_checked(self, random_image):
        with pytest.raises(tx.RegistryMismatchError):
            tx.compose(random_image, tx.PerturbationPlan((0, 1)))

    def test_all_operators_preserve_dimensions(self, stripe_image):
        reg = default_registry()
        for op_id in reg.ids:
            plan = tx.PerturbationPlan.from_ids(reg, [op_id])
            assert tx.compose(stripe_image, plan).size == stripe_image.size

    def test_shared_mask_for_both_removals(self, stripe_with_mask):
        # removing grooves then surfaces with one shared mask yields a
        # two-level image: every pixel is one of the two fill colors
        reg = default_registry()
        plan = tx.PerturbationPlan.from_ids(reg, ["groove_remove", "surface_remove"])
        out = tx.compose(stripe_with_mask.raster, plan)
        colors = np.unique(out.pixels.reshape(-1, 3), axis=0)
        assert len(colors) <= 2


class TestCuco:
    def test_commuting_flips_exactly_zero(self, stripe_image):
        reg = default_registry()
        plan = tx.PerturbationPlan.from_ids(reg, ["flip_h", "flip_v"])
        assert tx.cuco_score(stripe_image, plan, n_orders=4, seed=3) == 0.0

    def test_quarter_turns_on_square_exactly_zero(self, rng):
        # rotations about the center commute; note flips and quarter turns
        # together do NOT (they generate a non-abelian dihedral group)
        img = tx.Raster(rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8))
        reg = default_registry()
        plan = tx.PerturbationPlan.from_ids(reg, ["rotate_+90", "rotate_-90"])
        assert tx.cuco_score(img, plan, n_orders=5, seed=1) == 0.0

    def test_hue_additions_commute_within_rounding(self, random_image):
        reg = default_registry()
        plan = tx.PerturbationPlan.from_ids(reg, ["tune_5", "tune_10"])
        assert tx.cuco_score(random_image, plan, n_orders=4, seed=2) <= 1.0

    def test_requires_two_operators(self, random_image):
        reg = default_registry()
        with pytest.raises(ValueError):
            tx.cuco_score(random_image, tx.PerturbationPlan.from_ids(reg, ["flip_h"]))

    def test_requires_two_orders(self, random_image):
        reg = default_registry()
        plan = tx.PerturbationPlan.from_ids(reg, ["flip_h", "flip_v"])
        with pytest.raises(ValueError):
            tx.cuco_score(random_image, plan, n_orders=1)
