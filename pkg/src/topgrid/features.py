"""Edge detection, component labeling, dense optical flow and the
motion-aligned edge filtering that selects the pixel areas worth
reprojecting.

The flow solver is a coarse-to-fine Horn-Schunck scheme: a classic
Jacobi iteration of the regularized brightness-constancy system, run on
an image pyramid with the current estimate warped into the second frame
at each level.  It is dense (every foreground pixel gets a displacement,
which the per-component averaging requires) and dependency-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imaging import (
    BinaryMask,
    Component,
    FlowField,
    GrayImage,
    LabelImage,
    gaussian_blur,
    sobel_gradients,
)

__all__ = [
    "ComponentFlow",
    "FlowParams",
    "canny",
    "connected_components",
    "dense_flow",
    "mean_flow_per_component",
    "angular_threshold",
    "scanline_fill",
    "STATIONARY_FLOW_THRESHOLD",
]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

# Components whose mean flow magnitude falls below this (px/frame) are
# treated as stationary: all their edges are retained, so loiterers and
# deposited objects stay visible in the top view.
STATIONARY_FLOW_THRESHOLD = 0.1


@dataclass(frozen=True)
class ComponentFlow:
    """Mean optical flow over the pixels of one connected component."""

    label: int
    mean_u: float
    mean_v: float
    pixel_count: int

    def __post_init__(self):
        if self.pixel_count < 1:
            raise ValueError("ComponentFlow requires at least one pixel")
        if not (math.isfinite(self.mean_u) and math.isfinite(self.mean_v)):
            raise ValueError("ComponentFlow mean must be finite")

    @property
    def magnitude(self) -> float:
        return math.hypot(self.mean_u, self.mean_v)


@dataclass(frozen=True)
class FlowParams:
    """Horn-Schunck solver parameters.

    alpha follows the classic convention of weighting smoothness
    against 8-bit intensity gradients; the solver rescales unit-interval
    inputs accordingly, so alpha=10 behaves like the textbook setting.
    """

    alpha: float = 10.0
    iterations: int = 100
    pyramid_levels: int = 3
    presmooth_sigma: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")


def canny(img: GrayImage, low: float, high: float, sigma: float = 1.4) -> BinaryMask:
    """Classic Canny edge detection.

    Gaussian smoothing, Sobel magnitude/orientation, non-maximum
    suppression quantized to the four principal directions, then a
    double threshold with 8-connected hysteresis.  Every accepted pixel
    has gradient magnitude >= low.
    """
    if not (0 < low < high):
        raise ValueError("thresholds must satisfy 0 < low < high")
    smoothed = gaussian_blur(img, sigma)
    gx, gy = sobel_gradients(smoothed)
    mag = np.hypot(gx, gy)

    nms = _non_maximum_suppression(mag, gx, gy)

    strong = nms >= high
    weak = (nms >= low) & ~strong
    if not strong.any():
        return BinaryMask(np.zeros(mag.shape, dtype=bool))
    labels, n = ndimage.label(strong | weak, structure=_EIGHT_CONNECTED)
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return BinaryMask(keep[labels])


def _non_maximum_suppression(
    mag: np.ndarray, gx: np.ndarray, gy: np.ndarray
) -> np.ndarray:
    """Suppress pixels that are not a local maximum along the gradient."""
    padded = np.pad(mag, 1, mode="edge")

    def shifted(dy: int, dx: int) -> np.ndarray:
        h, w = mag.shape
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    angle = np.degrees(np.arctan2(gy, gx))
    angle[angle < 0] += 180.0

    # gy is positive downward, so 22.5-67.5 deg means a down-right
    # gradient: compare along the main diagonal.
    sector_h = (angle < 22.5) | (angle >= 157.5)
    sector_d1 = (angle >= 22.5) & (angle < 67.5)
    sector_v = (angle >= 67.5) & (angle < 112.5)
    sector_d2 = (angle >= 112.5) & (angle < 157.5)

    out = np.zeros_like(mag)
    for sector, (dy, dx) in (
        (sector_h, (0, 1)),
        (sector_d1, (1, 1)),
        (sector_v, (1, 0)),
        (sector_d2, (1, -1)),
    ):
        fwd = shifted(dy, dx)
        bwd = shifted(-dy, -dx)
        is_max = (mag >= fwd) & (mag >= bwd)
        out[sector & is_max] = mag[sector & is_max]
    return out


def connected_components(mask: BinaryMask, min_area: int = 50) -> LabelImage:
    """8-connected labeling with small components discarded.

    Surviving components are renumbered 1..K in the raster order of
    their first pixel; bounding boxes are tight.
    """
    raw, n = ndimage.label(mask.pixels, structure=_EIGHT_CONNECTED)
    if n == 0:
        return LabelImage(np.zeros(mask.pixels.shape, dtype=np.int32), ())

    counts = np.bincount(raw.ravel(), minlength=n + 1)
    surviving = [lab for lab in range(1, n + 1) if counts[lab] >= max(min_area, 1)]
    if not surviving:
        return LabelImage(np.zeros(mask.pixels.shape, dtype=np.int32), ())

    flat = raw.ravel()
    first_seen = {}
    for lab in surviving:
        first_seen[lab] = int(np.argmax(flat == lab))
    surviving.sort(key=first_seen.__getitem__)

    remap = np.zeros(n + 1, dtype=np.int32)
    components = []
    for new_label, lab in enumerate(surviving, start=1):
        remap[lab] = new_label
    relabeled = remap[raw]

    slices = ndimage.find_objects(relabeled)
    for new_label, lab in enumerate(surviving, start=1):
        sy, sx = slices[new_label - 1]
        components.append(
            Component(
                label=new_label,
                pixel_count=int(counts[lab]),
                bbox=(sx.start, sy.start, sx.stop - 1, sy.stop - 1),
            )
        )
    return LabelImage(relabeled, tuple(components))


_HS_AVG_KERNEL = np.array(
    [
        [1 / 12, 1 / 6, 1 / 12],
        [1 / 6, 0.0, 1 / 6],
        [1 / 12, 1 / 6, 1 / 12],
    ]
)


def _resize_bilinear(a: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling to an exact target shape."""
    h, w = a.shape
    th, tw = shape
    if (h, w) == (th, tw):
        return a.copy()
    ys = np.linspace(0, h - 1, th)
    xs = np.linspace(0, w - 1, tw)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(a, [yy, xx], order=1, mode="nearest")


def _pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    """Finest-first image pyramid; each level halves the resolution."""
    pyr = [img]
    for _ in range(levels - 1):
        prev = pyr[-1]
        if min(prev.shape) < 8:
            break
        smoothed = ndimage.gaussian_filter(prev, sigma=1.0, mode="nearest")
        pyr.append(smoothed[::2, ::2])
    return pyr


def _warp_bilinear(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape
    yy, xx = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    return ndimage.map_coordinates(img, [yy + v, xx + u], order=1, mode="nearest")


def _hs_level(
    prev: np.ndarray,
    curr: np.ndarray,
    u0: np.ndarray,
    v0: np.ndarray,
    alpha: float,
    iterations: int,
) -> tuple[np.ndarray, np.ndarray]:
    """One pyramid level: warp curr by the initial flow and run Jacobi
    iterations for the full flow around that linearization point."""
    curr_w = _warp_bilinear(curr, u0, v0)
    avg = 0.5 * (prev + curr_w)
    ix = ndimage.correlate1d(avg, [-0.5, 0.0, 0.5], axis=1, mode="nearest")
    iy = ndimage.correlate1d(avg, [-0.5, 0.0, 0.5], axis=0, mode="nearest")
    it = curr_w - prev

    denom = alpha * alpha + ix * ix + iy * iy
    u, v = u0.copy(), v0.copy()
    for _ in range(iterations):
        u_bar = ndimage.correlate(u, _HS_AVG_KERNEL, mode="nearest")
        v_bar = ndimage.correlate(v, _HS_AVG_KERNEL, mode="nearest")
        residual = ix * (u_bar - u0) + iy * (v_bar - v0) + it
        u = u_bar - ix * residual / denom
        v = v_bar - iy * residual / denom
    return u, v


def dense_flow(prev: GrayImage, curr: GrayImage, params: FlowParams = FlowParams()) -> FlowField:
    """Coarse-to-fine Horn-Schunck optical flow from prev to curr."""
    if prev.pixels.shape != curr.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {prev.pixels.shape} vs {curr.pixels.shape}"
        )
    # Solve on the 8-bit intensity amplitude so alpha keeps its
    # classic meaning (see FlowParams).
    a = gaussian_blur(prev, params.presmooth_sigma).pixels * 255.0
    b = gaussian_blur(curr, params.presmooth_sigma).pixels * 255.0

    pyr_a = _pyramid(a, params.pyramid_levels)
    pyr_b = _pyramid(b, params.pyramid_levels)

    coarsest = pyr_a[-1].shape
    u = np.zeros(coarsest)
    v = np.zeros(coarsest)
    for level in range(len(pyr_a) - 1, -1, -1):
        la, lb = pyr_a[level], pyr_b[level]
        if u.shape != la.shape:
            sy = la.shape[0] / u.shape[0]
            sx = la.shape[1] / u.shape[1]
            u = _resize_bilinear(u, la.shape) * sx
            v = _resize_bilinear(v, la.shape) * sy
        u, v = _hs_level(la, lb, u, v, params.alpha, params.iterations)
    return FlowField(u, v)


def mean_flow_per_component(labels: LabelImage, flow: FlowField) -> list[ComponentFlow]:
    """Arithmetic mean of the flow over each component's pixels, by label."""
    if labels.pixels.shape != flow.u.shape:
        raise ValueError(
            f"dimension mismatch: {labels.pixels.shape} vs {flow.u.shape}"
        )
    out = []
    lab = labels.pixels
    n = len(labels.components)
    if n == 0:
        return out
    sums_u = ndimage.sum_labels(flow.u, lab, index=range(1, n + 1))
    sums_v = ndimage.sum_labels(flow.v, lab, index=range(1, n + 1))
    for comp in sorted(labels.components, key=lambda c: c.label):
        i = comp.label - 1
        out.append(
            ComponentFlow(
                label=comp.label,
                mean_u=float(sums_u[i]) / comp.pixel_count,
                mean_v=float(sums_v[i]) / comp.pixel_count,
                pixel_count=comp.pixel_count,
            )
        )
    return out


def angular_threshold(
    edges: BinaryMask,
    labels: LabelImage,
    flows: list[ComponentFlow],
    gx: np.ndarray,
    gy: np.ndarray,
    theta_max: float = math.radians(20.0),
) -> BinaryMask:
    """Keep edge pixels whose tangent runs along their component's motion.

    The edge tangent at a pixel is perpendicular to the image gradient
    there.  Tangents are unoriented, so the comparison against the
    component's mean-flow direction is taken modulo pi.  Edge pixels
    outside any component are dropped; components whose mean flow is
    below STATIONARY_FLOW_THRESHOLD keep all their edges.
    """
    if not (0 < theta_max < math.pi / 2):
        raise ValueError("theta_max must lie in (0, pi/2)")
    shapes = {edges.pixels.shape, labels.pixels.shape, gx.shape, gy.shape}
    if len(shapes) != 1:
        raise ValueError("edges, labels and gradients must share dimensions")

    by_label = {f.label: f for f in flows}
    present = {c.label for c in labels.components}
    missing = present - set(by_label)
    if missing:
        raise ValueError(f"flows missing entries for labels {sorted(missing)}")

    lab = labels.pixels
    out = np.zeros(edges.pixels.shape, dtype=bool)
    candidates = edges.pixels & (lab > 0)
    if not candidates.any():
        return BinaryMask(out)

    tangent = np.arctan2(gy, gx) + math.pi / 2.0
    for comp_label in sorted(present):
        cf = by_label[comp_label]
        sel = candidates & (lab == comp_label)
        if not sel.any():
            continue
        if cf.magnitude < STATIONARY_FLOW_THRESHOLD:
            out |= sel
            continue
        flow_angle = math.atan2(cf.mean_v, cf.mean_u)
        diff = np.mod(tangent[sel] - flow_angle, math.pi)
        diff = np.minimum(diff, math.pi - diff)
        keep = diff < theta_max
        ys, xs = np.nonzero(sel)
        out[ys[keep], xs[keep]] = True
    return BinaryMask(out)


def scanline_fill(retained: BinaryMask, labels: LabelImage) -> BinaryMask:
    """Fill each component row-wise between its outermost retained pixels.

    Rows with two or more retained pixels of a component get every pixel
    of that component between the leftmost and rightmost one set; rows
    with fewer keep only what they had.
    """
    if retained.pixels.shape != labels.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {retained.pixels.shape} vs {labels.pixels.shape}"
        )
    out = retained.pixels.copy()
    lab = labels.pixels
    for comp in labels.components:
        x0, y0, x1, y1 = comp.bbox
        sub_ret = retained.pixels[y0 : y1 + 1, x0 : x1 + 1] & (
            lab[y0 : y1 + 1, x0 : x1 + 1] == comp.label
        )
        sub_lab = lab[y0 : y1 + 1, x0 : x1 + 1] == comp.label
        for r in range(sub_ret.shape[0]):
            xs = np.nonzero(sub_ret[r])[0]
            if xs.size >= 2:
                lo, hi = xs[0], xs[-1]
                row = out[y0 + r, x0 + lo : x0 + hi + 1]
                row |= sub_lab[r, lo : hi + 1]
    return BinaryMask(out)
