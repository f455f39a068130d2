"""Run configuration, calibration file format and metrics records.

Calibration files are plain text: a kind token followed by numbers,
with '#' starting a comment.  Run configurations are INI files with one
[view.N] section per camera; every path is resolved relative to the
config file and must exist at load time.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FlowParams
from .geometry import GridSpec, Homography, PinholeCamera
from .pipeline import ViewConfig

__all__ = [
    "CalibrationError",
    "ConfigError",
    "parse_calibration",
    "serialize_calibration",
    "load_calibration",
    "RunView",
    "RunConfig",
    "load_run_config",
    "MetricsRecord",
    "METRICS_FIELDS",
]


class CalibrationError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def _strip_comments(text: str) -> list[str]:
    tokens: list[str] = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    return tokens


def parse_calibration(text: str) -> Homography | PinholeCamera:
    """Parse a calibration file body into its typed calibration."""
    tokens = _strip_comments(text)
    if not tokens:
        raise CalibrationError("empty calibration file")
    kind = tokens[0].upper()
    values = []
    for tok in tokens[1:]:
        try:
            values.append(float(tok))
        except ValueError as exc:
            raise CalibrationError(f"non-numeric token {tok!r}") from exc

    if kind == "HOMOGRAPHY":
        if len(values) != 9:
            raise CalibrationError(
                f"HOMOGRAPHY expects 9 numbers, got {len(values)}"
            )
        try:
            return Homography(np.array(values).reshape(3, 3))
        except ValueError as exc:
            raise CalibrationError(str(exc)) from exc

    if kind == "PINHOLE":
        if len(values) != 16:
            raise CalibrationError(
                f"PINHOLE expects 16 numbers (fx fy cx cy, 9 rotation, "
                f"3 translation), got {len(values)}"
            )
        fx, fy, cx, cy = values[:4]
        r = np.array(values[4:13]).reshape(3, 3)
        t = np.array(values[13:16])
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > 1e-6:
            raise CalibrationError(f"rotation not orthonormal (error {err:.2e})")
        if np.linalg.det(r) < 0:
            raise CalibrationError("rotation must have determinant +1")
        # Snap tiny numeric drift to the nearest rotation so the strict
        # type invariant holds.
        u, _, vt = np.linalg.svd(r)
        r = u @ vt
        try:
            return PinholeCamera(fx=fx, fy=fy, cx=cx, cy=cy, rotation=r, translation=t)
        except ValueError as exc:
            raise CalibrationError(str(exc)) from exc

    raise CalibrationError(f"unknown calibration kind {tokens[0]!r}")


def serialize_calibration(calib: Homography | PinholeCamera) -> str:
    if isinstance(calib, Homography):
        rows = "\n".join(
            " ".join(f"{v:.17g}" for v in row) for row in calib.h
        )
        return f"HOMOGRAPHY\n{rows}\n"
    if isinstance(calib, PinholeCamera):
        lines = [
            "PINHOLE",
            f"{calib.fx:.17g} {calib.fy:.17g} {calib.cx:.17g} {calib.cy:.17g}",
        ]
        for row in calib.rotation:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(" ".join(f"{v:.17g}" for v in calib.translation))
        return "\n".join(lines) + "\n"
    raise TypeError(f"cannot serialize {type(calib).__name__}")


def load_calibration(path: Path) -> Homography | PinholeCamera:
    try:
        return parse_calibration(Path(path).read_text())
    except CalibrationError as exc:
        raise CalibrationError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class RunView:
    """One camera stream in a run: its ViewConfig plus file locations."""

    view: ViewConfig
    frame_pattern: str  # printf-style with one integer slot
    count: int
    background_path: Path | None
    max_range: float = 5.0

    def frame_path(self, index: int) -> Path:
        return Path(self.frame_pattern % index)


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    views: tuple[RunView, ...]
    background_mode: str = "user"  # "user" | "running-mean"
    background_window: int = 50
    cumulative_mode: str = "sliding"  # "full" | "sliding"
    t_span: int = 100
    s_min: float = 0.8
    min_cluster: int = 4
    min_votes: int | None = None
    output_dir: Path = Path("out")
    metrics_path: Path | None = None
    parallelism: int = 1
    topview_flow: FlowParams = field(
        default_factory=lambda: FlowParams(iterations=60, pyramid_levels=2)
    )

    @property
    def frame_count(self) -> int:
        return min(v.count for v in self.views)


def _get(section, key, cast, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"missing key {key!r} in section [{section.name}]")
        return default
    raw = section[key]
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r} in [{section.name}]: {raw!r}") from exc


def load_run_config(path) -> RunConfig:
    """Load and validate an INI run configuration.

    Relative paths resolve against the config file's directory; every
    referenced file (calibration, background, each frame) must exist.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(path.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base = path.parent

    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    if "grid" not in parser:
        raise ConfigError("missing [grid] section")
    g = parser["grid"]
    grid = GridSpec(
        origin_x=_get(g, "origin_x", float, 0.0),
        origin_y=_get(g, "origin_y", float, 0.0),
        cell_size=_get(g, "cell_size", float, required=True),
        cols=_get(g, "cols", int, required=True),
        rows=_get(g, "rows", int, required=True),
    )

    bg = parser["background"] if "background" in parser else {}
    background_mode = bg.get("mode", "user") if bg else "user"
    if background_mode not in ("user", "running-mean"):
        raise ConfigError(f"unknown background mode {background_mode!r}")
    background_window = int(bg.get("t", "50")) if bg else 50

    cum = parser["cumulative"] if "cumulative" in parser else {}
    cumulative_mode = cum.get("mode", "sliding") if cum else "sliding"
    if cumulative_mode not in ("full", "sliding"):
        raise ConfigError(f"unknown cumulative mode {cumulative_mode!r}")
    t_span = int(cum.get("t_span", "100")) if cum else 100

    ana = parser["analytics"] if "analytics" in parser else {}
    s_min = float(ana.get("s_min", "0.8")) if ana else 0.8
    min_cluster = int(ana.get("min_cluster", "4")) if ana else 4

    run = parser["run"] if "run" in parser else {}
    min_votes = None
    if run and run.get("min_votes", "").strip():
        min_votes = int(run["min_votes"])
    output_dir = resolve(run.get("output", "out")) if run else base / "out"
    metrics_path = None
    if run and run.get("metrics", "").strip():
        metrics_path = resolve(run["metrics"])
    parallelism = int(run.get("parallelism", "1")) if run else 1
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")

    tv = parser["topview_flow"] if "topview_flow" in parser else {}
    topview_flow = FlowParams(
        alpha=float(tv.get("alpha", "10")) if tv else 10.0,
        iterations=int(tv.get("iterations", "60")) if tv else 60,
        pyramid_levels=int(tv.get("levels", "2")) if tv else 2,
        presmooth_sigma=float(tv.get("presmooth_sigma", "1.0")) if tv else 1.0,
    )

    view_sections = sorted(
        (name for name in parser.sections() if name.startswith("view.")),
        key=lambda s: int(s.split(".", 1)[1]),
    )
    if not view_sections:
        raise ConfigError("config defines no [view.N] sections")

    views = []
    for name in view_sections:
        s = parser[name]
        kind = _get(s, "kind", str, required=True)
        if kind not in ("rgb", "depth"):
            raise ConfigError(f"[{name}] kind must be rgb or depth, got {kind!r}")
        calib_path = resolve(_get(s, "calibration", str, required=True))
        if not calib_path.is_file():
            raise ConfigError(f"[{name}] calibration file not found: {calib_path}")
        calibration = load_calibration(calib_path)

        pattern = str(resolve(_get(s, "frames", str, required=True)))
        count = _get(s, "count", int, required=True)
        if count < 2:
            raise ConfigError(f"[{name}] needs at least 2 frames")
        for i in range(count):
            fp = Path(pattern % i)
            if not fp.is_file():
                raise ConfigError(f"[{name}] frame file not found: {fp}")

        background_path = None
        if s.get("background", "").strip():
            background_path = resolve(s["background"])
            if not background_path.is_file():
                raise ConfigError(
                    f"[{name}] background file not found: {background_path}"
                )
        elif background_mode == "user":
            raise ConfigError(f"[{name}] user background mode needs a background file")

        flow = FlowParams(
            alpha=_get(s, "flow_alpha", float, 10.0),
            iterations=_get(s, "flow_iterations", int, 100),
            pyramid_levels=_get(s, "flow_levels", int, 3),
            presmooth_sigma=_get(s, "flow_presmooth_sigma", float, 1.0),
        )
        view = ViewConfig(
            view_id=name.split(".", 1)[1],
            kind=kind,
            calibration=calibration,
            tau=_get(s, "tau", float, 0.15),
            tau_depth=_get(s, "tau_depth", float, 0.15),
            min_area=_get(s, "min_area", int, 50 if kind == "rgb" else 25),
            canny_sigma=_get(s, "canny_sigma", float, 1.4),
            canny_low=_get(s, "canny_low", float, 0.04),
            canny_high=_get(s, "canny_high", float, 0.10),
            theta_max=math.radians(_get(s, "theta_max_deg", float, 20.0)),
            flow=flow,
            height_axis=_get(s, "height_axis", str, "y"),
        )
        views.append(
            RunView(
                view=view,
                frame_pattern=pattern,
                count=count,
                background_path=background_path,
                max_range=_get(s, "max_range", float, 5.0),
            )
        )

    n = len(views)
    if min_votes is not None and not (1 <= min_votes <= n):
        raise ConfigError(f"min_votes must lie in [1, {n}]")

    return RunConfig(
        grid=grid,
        views=tuple(views),
        background_mode=background_mode,
        background_window=background_window,
        cumulative_mode=cumulative_mode,
        t_span=t_span,
        s_min=s_min,
        min_cluster=min_cluster,
        min_votes=min_votes,
        output_dir=output_dir,
        metrics_path=metrics_path,
        parallelism=parallelism,
        topview_flow=topview_flow,
    )


# Field order of one metrics log line; parsers may rely on it.
METRICS_FIELDS = (
    "frame",
    "total_ms",
    "background_diff_ms",
    "components_ms",
    "grayscale_ms",
    "flow_ms",
    "edges_ms",
    "mean_flow_ms",
    "angular_ms",
    "fill_ms",
    "warp_ms",
    "cells",
    "fps",
    "clusters",
)


@dataclass(frozen=True)
class MetricsRecord:
    """Per-frame timing and occupancy statistics, one log line each."""

    frame: int
    stage_ms: dict[str, float]
    cells: int
    fps: float
    clusters: int

    def line(self) -> str:
        parts = []
        for name in METRICS_FIELDS:
            if name == "frame":
                parts.append(f"frame={self.frame:06d}")
            elif name == "cells":
                parts.append(f"cells={self.cells}")
            elif name == "clusters":
                parts.append(f"clusters={self.clusters}")
            elif name == "fps":
                parts.append(f"fps={self.fps:.6f}")
            elif name == "total_ms":
                parts.append(f"total_ms={self.stage_ms.get('total', 0.0):.3f}")
            else:
                stage = name[: -len("_ms")]
                parts.append(f"{name}={self.stage_ms.get(stage, 0.0):.3f}")
        return " ".join(parts)

    @staticmethod
    def parse(line: str) -> "MetricsRecord":
        kv = dict(part.split("=", 1) for part in line.split())
        stage_ms = {
            name[: -len("_ms")]: float(kv[name])
            for name in METRICS_FIELDS
            if name.endswith("_ms")
        }
        return MetricsRecord(
            frame=int(kv["frame"]),
            stage_ms=stage_ms,
            cells=int(kv["cells"]),
            fps=float(kv["fps"]),
            clusters=int(kv["clusters"]),
        )
