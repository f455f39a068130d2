"""Homographies, pinhole cameras and image-to-ground-plane mappings.

Two ground-plane conventions coexist, matching the two sensor paths:
RGB calibrations map image pixels to the Z=0 world plane through a 3x3
homography, while depth cameras backproject rays into a Y-up world and
drop the height coordinate before rasterizing onto the metric grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import BinaryMask, DepthImage

__all__ = [
    "Homography",
    "PinholeCamera",
    "GridSpec",
    "UnmappablePointError",
    "InvalidDepthError",
    "homography_from_points",
    "apply_homography",
    "apply_homography_many",
    "warp_mask_to_grid",
    "backproject_depth",
    "depth_mask_to_grid",
]

_W_EPS = 1e-12


class UnmappablePointError(ValueError):
    """A pixel maps to (or across) the horizon line; callers skip it."""


class InvalidDepthError(ValueError):
    """A depth sample is invalid (<= 0); callers skip it."""


@dataclass(frozen=True)
class Homography:
    """3x3 projective map from image pixels (x, y, 1) to ground meters."""

    h: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.h, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("homography must be a 3x3 matrix")
        det = np.linalg.det(m)
        if abs(det) <= 1e-12:
            raise ValueError("homography is singular")
        if abs(m[2, 2]) > 0:
            m = m / m[2, 2]
        view = m.view()
        view.flags.writeable = False
        object.__setattr__(self, "h", view)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.h))


@dataclass(frozen=True)
class PinholeCamera:
    """Intrinsics plus a world-to-camera rigid transform (p_cam = R p + t)."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation must be proper (det = +1)")
        rv = r.view()
        rv.flags.writeable = False
        tv = t.view()
        tv.flags.writeable = False
        object.__setattr__(self, "rotation", rv)
        object.__setattr__(self, "translation", tv)

    def project(self, point_world) -> tuple[float, float, float]:
        """Project a world point; returns (x, y, z_cam).

        z_cam is the camera-frame depth a range sensor would report for
        that pixel; points behind the camera have z_cam <= 0.
        """
        p = self.rotation @ np.asarray(point_world, dtype=float) + self.translation
        if abs(p[2]) <= _W_EPS:
            raise UnmappablePointError("point on the camera plane")
        return (
            float(self.fx * p[0] / p[2] + self.cx),
            float(self.fy * p[1] / p[2] + self.cy),
            float(p[2]),
        )


@dataclass(frozen=True)
class GridSpec:
    """Metric top-view raster: cell (0,0) has its corner at the origin."""

    origin_x: float
    origin_y: float
    cell_size: float
    cols: int
    rows: int

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.cols < 1 or self.rows < 1:
            raise ValueError("grid must have at least one cell")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(np.floor((x - self.origin_x) / self.cell_size)),
            int(np.floor((y - self.origin_y) / self.cell_size)),
        )

    def cell_center(self, cx: int, cy: int) -> tuple[float, float]:
        return (
            self.origin_x + (cx + 0.5) * self.cell_size,
            self.origin_y + (cy + 0.5) * self.cell_size,
        )


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity transform taking pts to centroid 0, RMS distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((pts - centroid) ** 2, axis=1)))
    scale = np.sqrt(2.0) / rms if rms > 0 else 1.0
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def homography_from_points(pairs) -> tuple[Homography, float]:
    """Least-squares DLT fit of an image-to-world homography.

    Both point sets are Hartley-normalized before assembling the linear
    system.  Returns the homography together with the RMS reprojection
    error over the input pairs (near zero for consistent inputs).
    """
    pairs = list(pairs)
    if len(pairs) < 4:
        raise ValueError("at least 4 point correspondences are required")
    src = np.array([p[0] for p in pairs], dtype=np.float64)
    dst = np.array([p[1] for p in pairs], dtype=np.float64)
    if src.shape[1] != 2 or dst.shape[1] != 2:
        raise ValueError("points must be 2-D")

    ts = _hartley_normalization(src)
    td = _hartley_normalization(dst)
    sh = (ts @ np.column_stack([src, np.ones(len(src))]).T).T
    dh = (td @ np.column_stack([dst, np.ones(len(dst))]).T).T

    a = np.zeros((2 * len(pairs), 9))
    for i, ((x, y, _), (u, v, _)) in enumerate(zip(sh, dh)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y, -u]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y, -v]

    _, s, vt = np.linalg.svd(a)
    if len(s) >= 2 and s[-2] <= 1e-12 * max(s[0], 1.0):
        raise ValueError("degenerate point configuration (rank-deficient system)")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(td) @ hn @ ts
    homography = Homography(h)

    mapped = apply_homography_many(homography, src)
    ok = np.isfinite(mapped).all(axis=1)
    if not ok.all():
        raise ValueError("degenerate point configuration (horizon crosses inputs)")
    rms = float(np.sqrt(np.mean(np.sum((mapped - dst) ** 2, axis=1))))
    return homography, rms


def apply_homography(h: Homography, p) -> tuple[float, float]:
    """Map one image point to ground-plane meters."""
    x, y = float(p[0]), float(p[1])
    m = h.h
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) <= _W_EPS:
        raise UnmappablePointError(f"point ({x}, {y}) lies on the horizon line")
    return (
        (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w,
        (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w,
    )


def apply_homography_many(h: Homography, pts: np.ndarray) -> np.ndarray:
    """Vectorized homography application; horizon points come back NaN."""
    return _map_points(h, pts)[0]


def _map_points(h: Homography, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(pts, dtype=np.float64)
    ph = np.column_stack([pts, np.ones(len(pts))])
    mapped = ph @ h.h.T
    w = mapped[:, 2]
    out = np.full((len(pts), 2), np.nan)
    ok = np.abs(w) > _W_EPS
    out[ok, 0] = mapped[ok, 0] / w[ok]
    out[ok, 1] = mapped[ok, 1] / w[ok]
    return out, w


def warp_mask_to_grid(mask: BinaryMask, h: Homography, spec: GridSpec) -> BinaryMask:
    """Forward-map a binary image mask onto the ground-plane grid.

    Every true pixel's center picks its containing cell; the pixel's
    four corners additionally bound a cell rectangle that gets filled,
    which closes the holes a pure center forward-warp would leave.
    Pixels mapping outside the grid or across the horizon are skipped.
    """
    out = np.zeros(spec.shape, dtype=bool)
    ys, xs = np.nonzero(mask.pixels)
    if ys.size == 0:
        return BinaryMask(out)
    pts = np.column_stack([xs.astype(float), ys.astype(float)])

    centers, w_center = _map_points(h, pts)
    corners = []
    corner_w = []
    for delta in ((-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)):
        mapped, w = _map_points(h, pts + np.array(delta))
        corners.append(mapped)
        corner_w.append(w)

    inv_cell = 1.0 / spec.cell_size
    ccx = np.floor((centers[:, 0] - spec.origin_x) * inv_cell)
    ccy = np.floor((centers[:, 1] - spec.origin_y) * inv_cell)
    center_ok = np.isfinite(ccx) & np.isfinite(ccy)

    corner_x = np.stack([c[:, 0] for c in corners])
    corner_y = np.stack([c[:, 1] for c in corners])
    # A usable corner quad needs all corners off the horizon and on the
    # same side of it as the center, or its extent is meaningless.
    w_sign = np.sign(w_center)
    same_side = np.stack(
        [(np.abs(w) > _W_EPS) & (np.sign(w) == w_sign) for w in corner_w]
    ).all(axis=0)
    corners_ok = (
        np.isfinite(corner_x).all(axis=0)
        & np.isfinite(corner_y).all(axis=0)
        & same_side
    )

    # Rectangle fill from the corner extremes wherever all corners map.
    rect = center_ok & corners_ok
    if rect.any():
        x0 = np.floor((corner_x[:, rect].min(axis=0) - spec.origin_x) * inv_cell)
        x1 = np.floor((corner_x[:, rect].max(axis=0) - spec.origin_x) * inv_cell)
        y0 = np.floor((corner_y[:, rect].min(axis=0) - spec.origin_y) * inv_cell)
        y1 = np.floor((corner_y[:, rect].max(axis=0) - spec.origin_y) * inv_cell)
        x0 = np.clip(x0, 0, spec.cols - 1).astype(int)
        x1 = np.clip(x1, 0, spec.cols - 1).astype(int)
        y0 = np.clip(y0, 0, spec.rows - 1).astype(int)
        y1 = np.clip(y1, 0, spec.rows - 1).astype(int)
        inside = (
            (corner_x[:, rect].max(axis=0) >= spec.origin_x)
            & (corner_x[:, rect].min(axis=0) < spec.origin_x + spec.cols * spec.cell_size)
            & (corner_y[:, rect].max(axis=0) >= spec.origin_y)
            & (corner_y[:, rect].min(axis=0) < spec.origin_y + spec.rows * spec.cell_size)
        )
        single = inside & (x0 == x1) & (y0 == y1)
        out[y0[single], x0[single]] = True
        multi = np.nonzero(inside & ~single)[0]
        for i in multi:
            out[y0[i] : y1[i] + 1, x0[i] : x1[i] + 1] = True

    # Pixels with a mappable center but a corner at the horizon fall
    # back to marking the center cell alone.
    center_only = center_ok & ~corners_ok
    if center_only.any():
        cx = ccx[center_only].astype(int)
        cy = ccy[center_only].astype(int)
        keep = (cx >= 0) & (cx < spec.cols) & (cy >= 0) & (cy < spec.rows)
        out[cy[keep], cx[keep]] = True
    return BinaryMask(out)


def backproject_depth(cam: PinholeCamera, pixel, depth: float):
    """Lift one pixel with a range value into world coordinates.

    The camera-frame point is the ray ((x-cx)/fx, (y-cy)/fy, 1) scaled
    by the depth, transformed to world via R^T (p - t).
    """
    if depth <= 0:
        raise InvalidDepthError("depth must be positive")
    x, y = float(pixel[0]), float(pixel[1])
    ray = np.array([(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0])
    p_cam = ray * depth
    p_world = cam.rotation.T @ (p_cam - cam.translation)
    return (float(p_world[0]), float(p_world[1]), float(p_world[2]))


def depth_mask_to_grid(
    depth: DepthImage,
    mask: BinaryMask,
    cam: PinholeCamera,
    spec: GridSpec,
    height_axis: str = "y",
) -> BinaryMask:
    """Backproject masked, valid depth pixels and rasterize onto the grid.

    height_axis selects which world coordinate is dropped: "y" keeps
    (X, Z) as the grid axes (the depth-camera convention), "z" keeps
    (X, Y) (the RGB ground-plane convention).
    """
    if depth.pixels.shape != mask.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {depth.pixels.shape} vs {mask.pixels.shape}"
        )
    if height_axis not in ("y", "z"):
        raise ValueError("height_axis must be 'y' or 'z'")
    out = np.zeros(spec.shape, dtype=bool)
    sel = mask.pixels & (depth.pixels > 0)
    ys, xs = np.nonzero(sel)
    if ys.size == 0:
        return BinaryMask(out)
    d = depth.pixels[ys, xs]
    rays = np.stack(
        [
            (xs - cam.cx) / cam.fx,
            (ys - cam.cy) / cam.fy,
            np.ones_like(d),
        ]
    )
    p_cam = rays * d
    p_world = cam.rotation.T @ (p_cam - cam.translation[:, None])
    if height_axis == "y":
        gx, gy = p_world[0], p_world[2]
    else:
        gx, gy = p_world[0], p_world[1]
    cx = np.floor((gx - spec.origin_x) / spec.cell_size).astype(int)
    cy = np.floor((gy - spec.origin_y) / spec.cell_size).astype(int)
    keep = (cx >= 0) & (cx < spec.cols) & (cy >= 0) & (cy < spec.rows)
    out[cy[keep], cx[keep]] = True
    return BinaryMask(out)
