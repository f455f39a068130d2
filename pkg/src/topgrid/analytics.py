"""Top-view temporal statistics over occupancy grids.

A cumulative grid averages per-cell binary occupancy over time, either
across the full history (running mean) or over a sliding window of
t_span frames via the O(1) subtract/add recurrence.  The sliding
recurrence re-synchronizes against an exact ring-buffer sum every 1024
updates to keep floating-point drift below the 1e-6 contract.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .features import FlowParams, dense_flow
from .geometry import GridSpec
from .imaging import BinaryMask, FlowField, GrayImage, gaussian_blur

__all__ = [
    "CumulativeGrid",
    "SaturationCluster",
    "SaturationReport",
    "update_cumulative",
    "topview_flow",
    "saturation_query",
]

_RESYNC_INTERVAL = 1024


class CumulativeGrid:
    """Per-cell time average of binary occupancy.

    mode "full" keeps the mean over every frame observed; mode
    "sliding" keeps the mean over the last t_span frames (mean over all
    frames during warmup, which coincides with "full" until the window
    fills).  Single-owner mutable state: exactly one writer feeds it.
    """

    def __init__(self, spec: GridSpec, mode: str = "full", t_span: int | None = None):
        if mode not in ("full", "sliding"):
            raise ValueError("mode must be 'full' or 'sliding'")
        if mode == "sliding":
            if t_span is None or t_span < 1:
                raise ValueError("sliding mode needs t_span >= 1")
        self.spec = spec
        self.mode = mode
        self.t_span = t_span
        self.t = 0
        self.values = np.zeros(spec.shape, dtype=np.float64)
        self._ring: deque[np.ndarray] = deque()
        self._since_resync = 0

    def snapshot(self) -> np.ndarray:
        """Read-only copy of the current per-cell averages."""
        return self.values.copy()


def update_cumulative(grid: CumulativeGrid, occupancy: BinaryMask) -> CumulativeGrid:
    """Fold one occupancy frame into the grid's running statistics."""
    if occupancy.pixels.shape != grid.spec.shape:
        raise ValueError(
            f"dimension mismatch: {occupancy.pixels.shape} vs {grid.spec.shape}"
        )
    p = occupancy.pixels.astype(np.float64)
    grid.t += 1
    if grid.mode == "full":
        grid.values += (p - grid.values) / grid.t
        np.clip(grid.values, 0.0, 1.0, out=grid.values)
        return grid

    span = grid.t_span
    grid._ring.append(occupancy.pixels.copy())
    if grid.t <= span:
        # Warmup: mean over every frame seen so far.
        grid.values += (p - grid.values) / grid.t
        np.clip(grid.values, 0.0, 1.0, out=grid.values)
        return grid

    oldest = grid._ring.popleft().astype(np.float64)
    grid.values += (p - oldest) / span
    grid._since_resync += 1
    if grid._since_resync >= _RESYNC_INTERVAL:
        acc = np.zeros(grid.spec.shape, dtype=np.float64)
        for frame in grid._ring:
            acc += frame
        grid.values = acc / span
        grid._since_resync = 0
    np.clip(grid.values, 0.0, 1.0, out=grid.values)
    return grid


def topview_flow(
    prev_occ: BinaryMask, curr_occ: BinaryMask, params: FlowParams = FlowParams()
) -> FlowField:
    """Dense optical flow between two occupancy rasters, in cells/frame.

    Masks become unit-intensity gray rasters and are lightly smoothed so
    the brightness-constancy solver has gradients to work with.
    """
    if prev_occ.pixels.shape != curr_occ.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {prev_occ.pixels.shape} vs {curr_occ.pixels.shape}"
        )
    a = gaussian_blur(GrayImage(prev_occ.pixels.astype(np.float64)), 1.0)
    b = gaussian_blur(GrayImage(curr_occ.pixels.astype(np.float64)), 1.0)
    return dense_flow(a, b, params)


@dataclass(frozen=True)
class SaturationCluster:
    """One connected cluster of saturated cells."""

    centroid: tuple[float, float]  # (cx, cy) in cell coordinates
    area: int
    cells: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class SaturationReport:
    cells: tuple[tuple[tuple[int, int], float], ...]
    clusters: tuple[SaturationCluster, ...]


def saturation_query(
    grid: CumulativeGrid, s_min: float = 0.8, min_cluster: int = 4
) -> SaturationReport:
    """Cells whose average occupancy reaches s_min, grouped 8-connected.

    Clusters smaller than min_cluster cells are dropped; loitering
    people and abandoned objects show up as the surviving clusters.
    """
    if not (0 < s_min <= 1):
        raise ValueError("s_min must lie in (0, 1]")
    hot = grid.values >= s_min
    labels, n = ndimage.label(hot, structure=np.ones((3, 3), dtype=bool))
    cells = []
    clusters = []
    for lab in range(1, n + 1):
        ys, xs = np.nonzero(labels == lab)
        if ys.size < min_cluster:
            continue
        member_cells = tuple(
            ((int(x), int(y)), float(grid.values[y, x])) for y, x in zip(ys, xs)
        )
        cells.extend(member_cells)
        clusters.append(
            SaturationCluster(
                centroid=(float(xs.mean()), float(ys.mean())),
                area=int(ys.size),
                cells=tuple((int(x), int(y)) for y, x in zip(ys, xs)),
            )
        )
    return SaturationReport(cells=tuple(cells), clusters=tuple(clusters))
