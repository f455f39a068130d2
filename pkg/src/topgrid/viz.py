"""Raster renderings of analytics outputs.

The cumulative heatmap maps value 0 to black and 1 to full-saturation
blue, linearly in between.  The flow map encodes direction as hue and
magnitude (clamped at 2 cells/frame) as saturation.
"""

from __future__ import annotations

import numpy as np

from .imaging import ColorImage, FlowField

__all__ = ["heatmap_image", "flowmap_image", "FLOW_MAGNITUDE_CLAMP"]

FLOW_MAGNITUDE_CLAMP = 2.0


def heatmap_image(values: np.ndarray) -> ColorImage:
    """Blue-channel heatmap of per-cell averages in [0, 1]."""
    v = np.clip(values, 0.0, 1.0)
    img = np.zeros(v.shape + (3,))
    img[:, :, 2] = v
    return ColorImage(img)


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB with h in [0, 1)."""
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def flowmap_image(flow: FlowField, magnitude_clamp: float = FLOW_MAGNITUDE_CLAMP) -> ColorImage:
    """Direction-as-hue, magnitude-as-saturation flow rendering."""
    angle = np.arctan2(flow.v, flow.u)
    hue = (angle + np.pi) / (2.0 * np.pi)
    hue = np.clip(hue, 0.0, 1.0 - 1e-9)
    mag = np.hypot(flow.u, flow.v)
    sat = np.clip(mag / magnitude_clamp, 0.0, 1.0)
    value = np.ones_like(sat)
    return ColorImage(np.clip(_hsv_to_rgb(hue, sat, value), 0.0, 1.0))
