"""topgrid: pedestrian top-view occupancy grids from multi-camera footage.

Per-camera low-level vision (background differencing, Canny edges,
dense Horn-Schunck flow, motion-aligned edge filtering) feeds a metric
ground-plane grid, either through calibrated RGB homographies with
multi-view intersection or through depth-camera backprojection.
Cumulative grids and top-view flow maps summarize the result over time.
"""

from .analytics import CumulativeGrid, SaturationReport, saturation_query, topview_flow, update_cumulative
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
    apply_homography,
    backproject_depth,
    depth_mask_to_grid,
    homography_from_points,
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
from .pipeline import (
    BackgroundModel,
    FrameResult,
    ViewConfig,
    process_depth_frame,
    process_rgb_frames,
    process_view_rgb,
    running_mean_background,
    update_background,
    user_background,
)
from .synthgen import (
    Agent,
    CameraRig,
    Scenario,
    ground_truth_footprint,
    grid_for,
    render_frame,
    standard_scenarios,
)

__version__ = "0.1.0"
