"""Core raster types and elementary pixel operations."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topgrid.imaging import (
    BinaryMask,
    ColorImage,
    DepthImage,
    GrayImage,
    LabelImage,
    color_absdiff_mask,
    gaussian_blur,
    sobel_gradients,
    to_gray,
)


def random_color(rng, h=8, w=8):
    return ColorImage(rng.random((h, w, 3)))


class TestTypes:
    def test_gray_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            GrayImage(np.full((4, 4), 1.5))
        with pytest.raises(ValueError):
            GrayImage(np.full((4, 4), np.nan))

    def test_images_are_readonly(self):
        img = GrayImage(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1.0

    def test_depth_invalid_marker(self):
        d = DepthImage(np.array([[0.0, 2.5], [5.0, 0.0]]), max_range=5.0)
        assert d.valid.tolist() == [[False, True], [True, False]]
        with pytest.raises(ValueError):
            DepthImage(np.array([[6.0]]), max_range=5.0)

    def test_label_image_requires_dense_labels(self):
        from topgrid.imaging import Component

        with pytest.raises(ValueError):
            LabelImage(
                np.zeros((2, 2), dtype=np.int32),
                (Component(label=2, pixel_count=1, bbox=(0, 0, 0, 0)),),
            )


class TestToGray:
    def test_white_maps_to_one(self):
        img = ColorImage(np.ones((4, 4, 3)))
        assert np.allclose(to_gray(img).pixels, 1.0)

    def test_pure_red_weight(self):
        arr = np.zeros((4, 4, 3))
        arr[:, :, 0] = 1.0
        assert np.allclose(to_gray(ColorImage(arr)).pixels, 0.299)

    def test_matches_per_pixel_weighted_sum(self):
        rng = np.random.default_rng(1)
        img = random_color(rng)
        got = to_gray(img).pixels
        # independent scalar recomputation, pixel by pixel
        for y in range(img.height):
            for x in range(img.width):
                r, g, b = img.pixels[y, x]
                assert got[y, x] == pytest.approx(
                    min(max(0.299 * r + 0.587 * g + 0.114 * b, 0.0), 1.0), abs=1e-12
                )


class TestColorAbsdiff:
    def test_identical_frames_empty(self):
        rng = np.random.default_rng(2)
        img = random_color(rng)
        assert color_absdiff_mask(img, img, 0.01).count() == 0

    def test_single_pixel_analytic_distance(self):
        bg = ColorImage(np.zeros((4, 4, 3)))
        arr = np.zeros((4, 4, 3))
        arr[2, 1] = 1.0  # distance sqrt(3)
        mask = color_absdiff_mask(ColorImage(arr), bg, 1.0)
        assert mask.count() == 1 and bool(mask.pixels[2, 1])

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(3)
        img, bg = random_color(rng), random_color(rng)
        mask = color_absdiff_mask(img, bg, 0.2)
        for y in range(img.height):
            for x in range(img.width):
                d = np.sqrt(np.sum((img.pixels[y, x] - bg.pixels[y, x]) ** 2))
                assert mask.pixels[y, x] == (d > 0.2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            color_absdiff_mask(
                ColorImage(np.zeros((4, 4, 3))), ColorImage(np.zeros((4, 5, 3))), 0.1
            )

    @given(st.floats(0.05, 0.5), st.floats(0.0, 1.0), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_monotone_in_tau(self, tau1, bump, seed):
        rng = np.random.default_rng(seed)
        img, bg = random_color(rng), random_color(rng)
        tau2 = tau1 + bump
        m1 = color_absdiff_mask(img, bg, tau1).pixels
        m2 = color_absdiff_mask(img, bg, tau2).pixels
        assert not (m2 & ~m1).any()  # mask(tau2) subset of mask(tau1)


def gaussian_kernel_1d(sigma):
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


class TestGaussianBlur:
    def test_constant_invariant(self):
        img = GrayImage(np.full((10, 12), 0.37))
        out = gaussian_blur(img, 1.7)
        assert np.allclose(out.pixels, 0.37, atol=1e-12)

    def test_impulse_center_matches_kernel_product(self):
        # direct 2-D kernel evaluation as the oracle
        arr = np.zeros((21, 21))
        arr[10, 10] = 1.0
        out = gaussian_blur(GrayImage(arr), 1.0)
        k = gaussian_kernel_1d(1.0)
        assert out.pixels[10, 10] == pytest.approx(k[len(k) // 2] ** 2, abs=1e-12)
        # full separable response
        expected = np.outer(k, k)
        r = len(k) // 2
        assert np.allclose(out.pixels[10 - r : 10 + r + 1, 10 - r : 10 + r + 1], expected, atol=1e-12)

    def test_semigroup_property(self):
        rng = np.random.default_rng(4)
        img = GrayImage(rng.random((48, 48)))
        twice = gaussian_blur(gaussian_blur(img, 1.0), 1.0)
        once = gaussian_blur(img, np.sqrt(2.0))
        # interior only: border clamping breaks the identity near edges
        assert np.abs(twice.pixels[8:-8, 8:-8] - once.pixels[8:-8, 8:-8]).max() < 0.01

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            gaussian_blur(GrayImage(np.zeros((4, 4))), 0.0)

    def test_mean_preserved_in_interior(self):
        rng = np.random.default_rng(5)
        arr = rng.random((40, 40))
        out = gaussian_blur(GrayImage(arr), 1.0)
        assert abs(out.pixels[6:-6, 6:-6].mean() - arr[6:-6, 6:-6].mean()) < 1e-2


class TestSobel:
    def test_constant_zero(self):
        gx, gy = sobel_gradients(GrayImage(np.full((8, 8), 0.5)))
        assert np.allclose(gx, 0) and np.allclose(gy, 0)

    def test_vertical_step_edge(self):
        arr = np.zeros((10, 10))
        arr[:, 5:] = 1.0
        gx, gy = sobel_gradients(GrayImage(arr))
        assert (gx[:, 4:6] > 0).all()
        assert np.allclose(gy[1:-1, :], 0.0)

    def test_ramp_closed_form(self):
        w = 17
        arr = np.tile(np.arange(w) / (w - 1), (9, 1))
        gx, gy = sobel_gradients(GrayImage(arr))
        assert np.allclose(gx[1:-1, 1:-1], 8.0 / (w - 1), atol=1e-12)
        assert np.allclose(gy, 0.0, atol=1e-12)

    def test_too_small_image(self):
        with pytest.raises(ValueError):
            sobel_gradients(GrayImage(np.zeros((2, 5))))


@given(st.integers(3, 20), st.integers(3, 20), st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_operations_preserve_dimensions(h, w, seed):
    rng = np.random.default_rng(seed)
    color = ColorImage(rng.random((h, w, 3)))
    gray = to_gray(color)
    assert gray.pixels.shape == (h, w)
    assert color_absdiff_mask(color, color, 0.1).pixels.shape == (h, w)
    assert gaussian_blur(gray, 1.0).pixels.shape == (h, w)
    gx, gy = sobel_gradients(gray)
    assert gx.shape == (h, w) and gy.shape == (h, w)
