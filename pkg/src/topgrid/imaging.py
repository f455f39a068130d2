"""Raster containers and elementary pixel operations.

All images store their pixel data as row-major numpy arrays indexed
``[y, x]`` with intensities kept as float64 in the unit interval; 8-bit
I/O converts by /255 elsewhere.  Every container exposes its array as a
read-only view, so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = [
    "GrayImage",
    "ColorImage",
    "DepthImage",
    "BinaryMask",
    "Component",
    "LabelImage",
    "FlowField",
    "to_gray",
    "color_absdiff_mask",
    "gaussian_blur",
    "sobel_gradients",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    view = a.view()
    view.flags.writeable = False
    return view


def _check_unit_interval(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: non-finite pixel values")
    if a.size and (a.min() < 0.0 or a.max() > 1.0):
        raise ValueError(f"{name}: pixel values outside [0, 1]")


@dataclass(frozen=True)
class GrayImage:
    """Single-channel intensity raster, values in [0, 1]."""

    pixels: np.ndarray  # (h, w) float64

    def __post_init__(self):
        a = np.asarray(self.pixels, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("GrayImage expects a 2-D array")
        _check_unit_interval(a, "GrayImage")
        object.__setattr__(self, "pixels", _readonly(a))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class ColorImage:
    """RGB raster, shape (h, w, 3), channels in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.pixels, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ValueError("ColorImage expects an (h, w, 3) array")
        _check_unit_interval(a, "ColorImage")
        object.__setattr__(self, "pixels", _readonly(a))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class DepthImage:
    """Range raster in meters; 0.0 encodes an invalid sample (no return)."""

    pixels: np.ndarray
    max_range: float = 5.0

    def __post_init__(self):
        a = np.asarray(self.pixels, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("DepthImage expects a 2-D array")
        if not np.all(np.isfinite(a)):
            raise ValueError("DepthImage: non-finite depth values")
        if a.size and a.min() < 0.0:
            raise ValueError("DepthImage: negative depth values")
        if a.size and a.max() > self.max_range:
            raise ValueError("DepthImage: depth beyond max_range")
        object.__setattr__(self, "pixels", _readonly(a))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return self.pixels > 0.0


@dataclass(frozen=True)
class BinaryMask:
    """Boolean raster tied to the dimensions of the image it came from."""

    pixels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.pixels)
        if a.dtype != np.bool_:
            a = a.astype(bool)
        if a.ndim != 2:
            raise ValueError("BinaryMask expects a 2-D array")
        object.__setattr__(self, "pixels", _readonly(a))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def count(self) -> int:
        return int(self.pixels.sum())


@dataclass(frozen=True)
class Component:
    """Metadata for one labeled region. bbox is (x0, y0, x1, y1), inclusive."""

    label: int
    pixel_count: int
    bbox: tuple[int, int, int, int]


@dataclass(frozen=True)
class LabelImage:
    """Dense non-negative integer labels; 0 is background, labels run 1..K."""

    pixels: np.ndarray
    components: tuple[Component, ...] = field(default=())

    def __post_init__(self):
        a = np.asarray(self.pixels)
        if not np.issubdtype(a.dtype, np.integer):
            raise ValueError("LabelImage expects integer labels")
        if a.ndim != 2:
            raise ValueError("LabelImage expects a 2-D array")
        if a.size and a.min() < 0:
            raise ValueError("LabelImage: negative labels")
        object.__setattr__(self, "pixels", _readonly(a.astype(np.int32)))
        object.__setattr__(self, "components", tuple(self.components))
        labels = sorted(c.label for c in self.components)
        if labels != list(range(1, len(labels) + 1)):
            raise ValueError("LabelImage: component labels must be dense 1..K")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class FlowField:
    """Dense per-pixel displacement field in pixels/frame."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.shape != v.shape or u.ndim != 2:
            raise ValueError("FlowField expects two matching 2-D arrays")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("FlowField: non-finite displacements")
        object.__setattr__(self, "u", _readonly(u))
        object.__setattr__(self, "v", _readonly(v))

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]


def to_gray(img: ColorImage) -> GrayImage:
    """Luma conversion: 0.299 R + 0.587 G + 0.114 B, clamped to [0, 1]."""
    p = img.pixels
    gray = 0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]
    return GrayImage(np.clip(gray, 0.0, 1.0))


def color_absdiff_mask(img: ColorImage, bg: ColorImage, tau: float) -> BinaryMask:
    """Foreground mask: true where the Euclidean RGB distance to bg exceeds tau."""
    if img.pixels.shape != bg.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {img.pixels.shape} vs {bg.pixels.shape}"
        )
    d = img.pixels - bg.pixels
    dist = np.sqrt(np.sum(d * d, axis=2))
    return BinaryMask(dist > tau)


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian smoothing, kernel radius ceil(3*sigma).

    Borders are handled by clamping to the edge pixel, the single
    convolution border policy used throughout this package.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = int(np.ceil(3.0 * sigma))
    out = ndimage.gaussian_filter(
        img.pixels, sigma=sigma, mode="nearest", radius=radius
    )
    return GrayImage(np.clip(out, 0.0, 1.0))


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


def sobel_gradients(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized 3x3 Sobel responses (gx, gy) with edge-clamped borders.

    gx is positive for intensity increasing toward +x (right), gy toward
    +y (down, in raster orientation).
    """
    if img.width < 3 or img.height < 3:
        raise ValueError("image smaller than the 3x3 Sobel kernel")
    gx = ndimage.correlate(img.pixels, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img.pixels, _SOBEL_Y, mode="nearest")
    return gx, gy
