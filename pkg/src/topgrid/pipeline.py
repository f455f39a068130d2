"""Per-frame orchestration across camera views.

Each RGB view runs background differencing, component labeling, dense
flow, Canny edges, the motion-parallel edge filter and scanline fill,
then reprojects the surviving pixels onto the shared metric grid.  The
per-view grid masks vote into an integer grid; a cell is occupied when
at least min_votes views marked it (min_votes = n is the strict
all-views intersection).  Depth views reproject through the camera
model instead and need no intersection.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .features import (
    ComponentFlow,
    FlowParams,
    angular_threshold,
    canny,
    connected_components,
    dense_flow,
    mean_flow_per_component,
    scanline_fill,
)
from .geometry import (
    GridSpec,
    Homography,
    PinholeCamera,
    depth_mask_to_grid,
    warp_mask_to_grid,
)
from .imaging import (
    BinaryMask,
    ColorImage,
    DepthImage,
    FlowField,
    GrayImage,
    LabelImage,
    color_absdiff_mask,
    gaussian_blur,
    sobel_gradients,
    to_gray,
)

__all__ = [
    "BackgroundModel",
    "ViewConfig",
    "ViewResult",
    "FrameResult",
    "StageError",
    "user_background",
    "running_mean_background",
    "update_background",
    "process_view_rgb",
    "process_rgb_frames",
    "process_depth_frame",
]

_BG_RESYNC_INTERVAL = 256


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage and view identity."""

    def __init__(self, stage: str, view_id: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed for view {view_id!r}: {cause}")
        self.stage = stage
        self.view_id = view_id
        self.__cause__ = cause


@dataclass(frozen=True)
class BackgroundModel:
    """Static or running-mean background frame.

    In running-mean mode the frame is the arithmetic mean of the last
    min(frames_accumulated, window) frames fed to it; user mode pins a
    frame chosen by the operator and ignores updates.
    """

    mode: str  # "user" | "running-mean"
    frame: ColorImage | DepthImage | None
    window: int = 1
    frames_accumulated: int = 0
    _ring: tuple = field(default=(), repr=False)
    _sum: np.ndarray | None = field(default=None, repr=False)
    _since_resync: int = 0

    def __post_init__(self):
        if self.mode not in ("user", "running-mean"):
            raise ValueError("mode must be 'user' or 'running-mean'")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.mode == "user" and self.frame is None:
            raise ValueError("user mode requires a frame")


def user_background(frame: ColorImage | DepthImage) -> BackgroundModel:
    return BackgroundModel(mode="user", frame=frame)


def running_mean_background(window: int) -> BackgroundModel:
    """Empty running-mean model; feed frames via update_background."""
    return BackgroundModel(mode="running-mean", frame=None, window=window)


def _mean_frame(template, mean: np.ndarray):
    if isinstance(template, DepthImage):
        return DepthImage(mean, max_range=template.max_range)
    if isinstance(template, ColorImage):
        return ColorImage(np.clip(mean, 0.0, 1.0))
    return GrayImage(np.clip(mean, 0.0, 1.0))


def update_background(model: BackgroundModel, frame) -> BackgroundModel:
    """Fold one frame into the model; user mode returns it unchanged."""
    if model.frame is not None and model.frame.pixels.shape != frame.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {frame.pixels.shape} vs {model.frame.pixels.shape}"
        )
    if model.mode == "user":
        return model

    ring = list(model._ring)
    total = model._sum.copy() if model._sum is not None else None
    pixels = frame.pixels.astype(np.float64)
    ring.append(pixels)
    if total is None:
        total = pixels.copy()
    else:
        total += pixels
    if len(ring) > model.window:
        total -= ring.pop(0)
    since = model._since_resync + 1
    if since >= _BG_RESYNC_INTERVAL:
        total = np.zeros_like(total)
        for f in ring:
            total += f
        since = 0
    mean = total / len(ring)
    return replace(
        model,
        frame=_mean_frame(frame, mean),
        frames_accumulated=model.frames_accumulated + 1,
        _ring=tuple(ring),
        _sum=total,
        _since_resync=since,
    )


@dataclass(frozen=True)
class ViewConfig:
    """One camera's calibration and detection thresholds."""

    view_id: str
    kind: str  # "rgb" | "depth"
    calibration: Homography | PinholeCamera
    tau: float = 0.15
    tau_depth: float = 0.15
    min_area: int = 50
    canny_sigma: float = 1.4
    canny_low: float = 0.04
    canny_high: float = 0.10
    theta_max: float = float(np.radians(20.0))
    flow: FlowParams = FlowParams()
    height_axis: str = "y"

    def __post_init__(self):
        if self.kind == "rgb" and not isinstance(self.calibration, Homography):
            raise ValueError("rgb views calibrate with a Homography")
        if self.kind == "depth" and not isinstance(self.calibration, PinholeCamera):
            raise ValueError("depth views calibrate with a PinholeCamera")
        if self.kind not in ("rgb", "depth"):
            raise ValueError("kind must be 'rgb' or 'depth'")


@dataclass(frozen=True)
class ViewResult:
    """Everything one view produced for one frame, for inspection."""

    view_id: str
    objects: BinaryMask
    labels: LabelImage
    edges: BinaryMask
    retained: BinaryMask
    filled: BinaryMask
    flow: FlowField
    component_flows: tuple[ComponentFlow, ...]
    grid_mask: BinaryMask
    timings_ms: dict[str, float]


@dataclass(frozen=True)
class FrameResult:
    views: tuple[ViewResult, ...]
    votes: np.ndarray
    occupancy: BinaryMask
    min_votes: int
    timings_ms: dict[str, float]


class _StageClock:
    def __init__(self, view_id: str):
        self.view_id = view_id
        self.timings: dict[str, float] = {}

    def run(self, stage: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except Exception as exc:  # noqa: BLE001 - stage identity must survive
            raise StageError(stage, self.view_id, exc) from exc
        self.timings[stage] = self.timings.get(stage, 0.0) + (
            (time.perf_counter() - start) * 1e3
        )
        return result


def process_view_rgb(
    view: ViewConfig,
    prev: ColorImage,
    curr: ColorImage,
    bg: BackgroundModel,
    spec: GridSpec,
) -> ViewResult:
    """Run the RGB detection chain for one view and reproject to the grid."""
    if view.kind != "rgb":
        raise ValueError(f"view {view.view_id!r} is not an rgb view")
    if bg.frame is None:
        raise ValueError("background model has no frame yet")
    clock = _StageClock(view.view_id)

    objects = clock.run("background_diff", color_absdiff_mask, curr, bg.frame, view.tau)
    labels = clock.run("components", connected_components, objects, view.min_area)
    gray_prev = clock.run("grayscale", to_gray, prev)
    gray_curr = clock.run("grayscale", to_gray, curr)
    flow = clock.run("flow", dense_flow, gray_prev, gray_curr, view.flow)
    edges = clock.run("edges", canny, gray_curr, view.canny_low, view.canny_high, view.canny_sigma)

    def gradients():
        smoothed = gaussian_blur(gray_curr, view.canny_sigma)
        return sobel_gradients(smoothed)

    gx, gy = clock.run("edges", gradients)
    flows = clock.run("mean_flow", mean_flow_per_component, labels, flow)
    retained = clock.run(
        "angular", angular_threshold, edges, labels, flows, gx, gy, view.theta_max
    )
    filled = clock.run("fill", scanline_fill, retained, labels)
    grid_mask = clock.run("warp", warp_mask_to_grid, filled, view.calibration, spec)

    return ViewResult(
        view_id=view.view_id,
        objects=objects,
        labels=labels,
        edges=edges,
        retained=retained,
        filled=filled,
        flow=flow,
        component_flows=tuple(flows),
        grid_mask=grid_mask,
        timings_ms=clock.timings,
    )


def _merge_timings(per_view: list[dict[str, float]]) -> dict[str, float]:
    merged: dict[str, float] = {}
    for timings in per_view:
        for stage, ms in timings.items():
            merged[stage] = merged.get(stage, 0.0) + ms
    return merged


def process_rgb_frames(
    views: list[ViewConfig],
    frames_curr: list[ColorImage],
    frames_prev: list[ColorImage],
    backgrounds: list[BackgroundModel],
    spec: GridSpec,
    min_votes: int | None = None,
    workers: int = 1,
) -> FrameResult:
    """Process all views for one time step and fuse the vote grid.

    min_votes defaults to the number of views, the strict intersection
    rule; the vote grid itself is returned for inspection.
    """
    n = len(views)
    if not (len(frames_curr) == len(frames_prev) == len(backgrounds) == n):
        raise ValueError("one frame pair and background per view is required")
    if n == 0:
        raise ValueError("at least one view is required")
    if min_votes is None:
        min_votes = n
    if not (1 <= min_votes <= n):
        raise ValueError("min_votes must lie in [1, n]")

    start = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda i: process_view_rgb(
                        views[i], frames_prev[i], frames_curr[i], backgrounds[i], spec
                    ),
                    range(n),
                )
            )
    else:
        results = [
            process_view_rgb(views[i], frames_prev[i], frames_curr[i], backgrounds[i], spec)
            for i in range(n)
        ]

    votes = np.zeros(spec.shape, dtype=np.int32)
    for r in results:
        votes += r.grid_mask.pixels
    occupancy = BinaryMask(votes >= min_votes)
    timings = _merge_timings([r.timings_ms for r in results])
    timings["total"] = (time.perf_counter() - start) * 1e3
    return FrameResult(
        views=tuple(results),
        votes=votes,
        occupancy=occupancy,
        min_votes=min_votes,
        timings_ms=timings,
    )


def process_depth_frame(
    view: ViewConfig,
    prev: DepthImage,
    curr: DepthImage,
    bg: BackgroundModel,
    spec: GridSpec,
) -> FrameResult:
    """Depth variant: range differencing, edges and flow on normalized
    depth, then direct backprojection; no multi-view intersection."""
    if view.kind != "depth":
        raise ValueError(f"view {view.view_id!r} is not a depth view")
    if bg.frame is None:
        raise ValueError("background model has no frame yet")
    clock = _StageClock(view.view_id)
    start = time.perf_counter()

    def depth_foreground():
        valid = (curr.pixels > 0) & (bg.frame.pixels > 0)
        return BinaryMask(valid & (np.abs(curr.pixels - bg.frame.pixels) > view.tau_depth))

    objects = clock.run("background_diff", depth_foreground)
    labels = clock.run("components", connected_components, objects, view.min_area)

    def normalize(img: DepthImage) -> GrayImage:
        return GrayImage(np.clip(img.pixels / img.max_range, 0.0, 1.0))

    gray_prev = clock.run("grayscale", normalize, prev)
    gray_curr = clock.run("grayscale", normalize, curr)
    flow = clock.run("flow", dense_flow, gray_prev, gray_curr, view.flow)
    edges = clock.run("edges", canny, gray_curr, view.canny_low, view.canny_high, view.canny_sigma)

    def gradients():
        smoothed = gaussian_blur(gray_curr, view.canny_sigma)
        return sobel_gradients(smoothed)

    gx, gy = clock.run("edges", gradients)
    flows = clock.run("mean_flow", mean_flow_per_component, labels, flow)
    retained = clock.run(
        "angular", angular_threshold, edges, labels, flows, gx, gy, view.theta_max
    )
    filled = clock.run("fill", scanline_fill, retained, labels)
    grid_mask = clock.run(
        "warp",
        depth_mask_to_grid,
        curr,
        filled,
        view.calibration,
        spec,
        view.height_axis,
    )

    result = ViewResult(
        view_id=view.view_id,
        objects=objects,
        labels=labels,
        edges=edges,
        retained=retained,
        filled=filled,
        flow=flow,
        component_flows=tuple(flows),
        grid_mask=grid_mask,
        timings_ms=clock.timings,
    )
    votes = grid_mask.pixels.astype(np.int32)
    timings = dict(clock.timings)
    timings["total"] = (time.perf_counter() - start) * 1e3
    return FrameResult(
        views=(result,),
        votes=votes,
        occupancy=grid_mask,
        min_votes=1,
        timings_ms=timings,
    )
