"""Synthetic multi-camera scene generator.

Stands in for real surveillance footage as the ground-truth oracle:
agents are upright cylinders on a noise-textured ground plane, rendered
by deterministic per-pixel ray casting into RGB or depth frames.  RGB
rigs live in a Z-up world (ground plane Z=0, the homography
convention); depth rigs live in a Y-up world (ground plane XZ).  Agent
positions and the occupancy grid always use the shared 2-D ground
coordinates, so the same footprint oracle serves both pipelines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import GridSpec, Homography, PinholeCamera
from .imaging import BinaryMask, ColorImage, DepthImage

__all__ = [
    "Agent",
    "CameraRig",
    "Scenario",
    "look_at",
    "rgb_rig",
    "depth_rig",
    "render_frame",
    "render_background",
    "ground_truth_footprint",
    "grid_for",
    "standard_scenarios",
    "scenario_by_name",
]

_EPS = 1e-9
_SKY = np.array([0.55, 0.65, 0.75])
_TEXTURE_SIZE = 128
_TEXTURE_METERS_PER_TEXEL = 0.25


@dataclass(frozen=True)
class Agent:
    """A cylinder walking the ground plane along piecewise-linear waypoints.

    Waypoints are (gx, gy, frame); the agent exists only between its
    first and last waypoint frame.
    """

    radius: float
    height: float
    albedo: tuple[float, float, float]
    waypoints: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("agent radius and height must be positive")
        object.__setattr__(self, "waypoints", tuple(tuple(w) for w in self.waypoints))
        frames = [w[2] for w in self.waypoints]
        if len(frames) < 1:
            raise ValueError("agent needs at least one waypoint")
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("waypoint frames must be strictly increasing")

    def position(self, t: int) -> tuple[float, float] | None:
        """Ground position at frame t, or None when not present."""
        wps = self.waypoints
        if t < wps[0][2] or t > wps[-1][2]:
            return None
        for (x0, y0, f0), (x1, y1, f1) in zip(wps, wps[1:]):
            if f0 <= t <= f1:
                a = (t - f0) / (f1 - f0)
                return (x0 + a * (x1 - x0), y0 + a * (y1 - y0))
        return (wps[-1][0], wps[-1][1])


@dataclass(frozen=True, eq=False)
class CameraRig:
    """One mounted camera: intrinsics/extrinsics plus its sensor kind."""

    kind: str  # "rgb" | "depth"
    pinhole: PinholeCamera
    resolution: tuple[int, int]  # (width, height)
    homography: Homography | None = None  # image -> ground plane, rgb only

    def __post_init__(self):
        if self.kind not in ("rgb", "depth"):
            raise ValueError("camera kind must be 'rgb' or 'depth'")
        if self.kind == "rgb" and self.homography is None:
            raise ValueError("rgb rigs carry a derived ground-plane homography")


@dataclass(frozen=True, eq=False)
class Scenario:
    """World description: extent in meters, agents, cameras, timing."""

    name: str
    extent: tuple[float, float]
    agents: tuple[Agent, ...]
    cameras: tuple[CameraRig, ...]
    frame_count: int
    seed: int = 0
    noise_sigma: float = 0.01
    max_range: float = 5.0
    # Vertical plane at gy = back_wall_z, closing off indoor depth scenes
    # so every forward ray returns a valid range.
    back_wall_z: float | None = None
    # Vote count the scenario is designed for (None = all views, the
    # strict intersection rule).
    min_votes: int | None = None
    # Angular threshold suited to the untextured cylinder proxies; their
    # edge-orientation spectrum is far narrower than clothed pedestrians.
    theta_max_deg: float = 75.0

    def __post_init__(self):
        if self.frame_count < 2:
            raise ValueError("scenario needs at least 2 frames")
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "cameras", tuple(self.cameras))
        ex, ey = self.extent
        for agent in self.agents:
            for gx, gy, _ in agent.waypoints:
                if not (0 <= gx <= ex and 0 <= gy <= ey):
                    raise ValueError("agent waypoint outside the world extent")

    def camera_index(self, rig: CameraRig) -> int:
        for i, c in enumerate(self.cameras):
            if c is rig:
                return i
        raise ValueError("camera does not belong to this scenario")


def look_at(eye, target, up) -> tuple[np.ndarray, np.ndarray]:
    """World-to-camera rotation and translation for a camera at `eye`
    pointing its optical axis at `target`."""
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    fwd = fwd / np.linalg.norm(fwd)
    up = np.asarray(up, dtype=float)
    right = np.cross(fwd, up)
    n = np.linalg.norm(right)
    if n < 1e-9:
        raise ValueError("view direction parallel to the up vector")
    right /= n
    down = np.cross(fwd, right)
    r = np.stack([right, down, fwd])
    t = -r @ eye
    return r, t


def _intrinsics(resolution: tuple[int, int], fov_deg: float):
    w, h = resolution
    fx = (w / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    return fx, fx, (w - 1) / 2.0, (h - 1) / 2.0


def rgb_rig(eye, target, resolution=(160, 120), fov_deg=60.0) -> CameraRig:
    """RGB camera in the Z-up world, with its induced ground homography."""
    r, t = look_at(eye, target, up=(0.0, 0.0, 1.0))
    fx, fy, cx, cy = _intrinsics(resolution, fov_deg)
    cam = PinholeCamera(fx=fx, fy=fy, cx=cx, cy=cy, rotation=r, translation=t)
    k = np.array([[fx, 0, cx], [0, fy, cy], [0, 0, 1.0]])
    world_to_image = k @ np.column_stack([r[:, 0], r[:, 1], t])
    homography = Homography(np.linalg.inv(world_to_image))
    rig = CameraRig(kind="rgb", pinhole=cam, resolution=resolution, homography=homography)
    _check_rig_consistency(rig)
    return rig


def depth_rig(eye, target, resolution=(176, 144), fov_deg=55.0) -> CameraRig:
    """Depth camera in the Y-up world (ground plane XZ)."""
    r, t = look_at(eye, target, up=(0.0, 1.0, 0.0))
    fx, fy, cx, cy = _intrinsics(resolution, fov_deg)
    cam = PinholeCamera(fx=fx, fy=fy, cx=cx, cy=cy, rotation=r, translation=t)
    return CameraRig(kind="depth", pinhole=cam, resolution=resolution)


def _check_rig_consistency(rig: CameraRig) -> None:
    """Derived homography and pinhole must agree on ground-plane points."""
    inv = rig.homography.inverse()
    rng = np.random.default_rng(7)
    for _ in range(8):
        gx, gy = rng.uniform(1.0, 5.0, size=2)
        px, py, z = rig.pinhole.project((gx, gy, 0.0))
        if z <= 0:
            continue
        hx = inv.h @ np.array([gx, gy, 1.0])
        hx = hx[:2] / hx[2]
        if not (abs(hx[0] - px) < 1e-9 and abs(hx[1] - py) < 1e-9):
            raise AssertionError("homography disagrees with pinhole projection")


def _ground_texture(seed: int) -> np.ndarray:
    # Mid-gray band: agents keep luma contrast against it for the edge
    # detector, whatever their hue.
    rng = np.random.default_rng([seed, 0xBEEF])
    tex = rng.random((_TEXTURE_SIZE, _TEXTURE_SIZE, 3))
    tex = ndimage.gaussian_filter(tex, sigma=(1.0, 1.0, 0.0), mode="wrap")
    lo, hi = tex.min(), tex.max()
    return 0.35 + 0.3 * (tex - lo) / (hi - lo)


def _rays(rig: CameraRig) -> tuple[np.ndarray, np.ndarray]:
    """Camera center and per-pixel world ray directions (z_cam = 1)."""
    cam = rig.pinhole
    w, h = rig.resolution
    xs = (np.arange(w) - cam.cx) / cam.fx
    ys = (np.arange(h) - cam.cy) / cam.fy
    dirs_cam = np.stack(
        [
            np.broadcast_to(xs[None, :], (h, w)),
            np.broadcast_to(ys[:, None], (h, w)),
            np.ones((h, w)),
        ]
    )
    dirs_world = np.einsum("ji,jhw->ihw", cam.rotation, dirs_cam)
    origin = -cam.rotation.T @ cam.translation
    return origin, dirs_world


def _cylinder_hits(
    origin, dirs, axes: tuple[int, int, int], ax: float, ay: float, radius: float, height: float
) -> np.ndarray:
    """Smallest positive ray parameter hitting the cylinder, inf on miss."""
    ui, vi, hi = axes
    ou, ov, oh = origin[ui] - ax, origin[vi] - ay, origin[hi]
    du, dv, dh = dirs[ui], dirs[vi], dirs[hi]

    a = du * du + dv * dv
    b = 2.0 * (ou * du + ov * dv)
    c = ou * ou + ov * ov - radius * radius
    disc = b * b - 4.0 * a * c
    hit = (disc >= 0) & (a > _EPS)
    sq = np.sqrt(np.where(hit, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = np.where(hit, (-b - sq) / (2.0 * a), np.inf)
        s2 = np.where(hit, (-b + sq) / (2.0 * a), np.inf)
        s_cap = np.where(np.abs(dh) > _EPS, (height - oh) / dh, np.inf)

    best = np.full(du.shape, np.inf)
    for s in (s1, s2):
        z = oh + s * dh
        ok = hit & (s > _EPS) & (z >= 0.0) & (z <= height)
        best = np.where(ok & (s < best), s, best)
    cu = ou + s_cap * du
    cv = ov + s_cap * dv
    ok = (s_cap > _EPS) & (cu * cu + cv * cv <= radius * radius)
    best = np.where(ok & (s_cap < best), s_cap, best)
    return best


def _cast_scene(scenario: Scenario, rig: CameraRig, t: int, with_agents: bool):
    """Z-buffered ray cast; returns ray parameters of the nearest hit,
    the winning agent index, the background surfaces and the ground hit
    coordinates."""
    axes = (0, 1, 2) if rig.kind == "rgb" else (0, 2, 1)
    ui, vi, hi = axes
    origin, dirs = _rays(rig)
    dh = dirs[hi]
    with np.errstate(divide="ignore", invalid="ignore"):
        s_ground = np.where(dh < -_EPS, -origin[hi] / dh, np.inf)
        if scenario.back_wall_z is not None:
            dv = dirs[vi]
            s_wall = np.where(
                dv > _EPS, (scenario.back_wall_z - origin[vi]) / dv, np.inf
            )
            wall_h = origin[hi] + s_wall * dh
            s_wall = np.where(wall_h >= 0.0, s_wall, np.inf)
        else:
            s_wall = np.full(s_ground.shape, np.inf)

    on_wall = s_wall < s_ground
    s_background = np.where(on_wall, s_wall, s_ground)
    s_best = s_background.copy()
    winner = np.full(s_ground.shape, -1, dtype=np.int32)
    if with_agents:
        for idx, agent in enumerate(scenario.agents):
            pos = agent.position(t)
            if pos is None:
                continue
            s_a = _cylinder_hits(origin, dirs, axes, pos[0], pos[1], agent.radius, agent.height)
            closer = s_a < s_best
            s_best = np.where(closer, s_a, s_best)
            winner = np.where(closer, idx, winner)

    gx = origin[ui] + s_ground * dirs[ui]
    gy = origin[vi] + s_ground * dirs[vi]
    return s_best, winner, s_background, on_wall, gx, gy


_WALL_COLOR = np.array([0.62, 0.6, 0.58])


def _render(scenario: Scenario, rig: CameraRig, t: int, with_agents: bool, with_noise: bool):
    cam_idx = scenario.camera_index(rig)
    s_best, winner, s_background, on_wall, gx, gy = _cast_scene(
        scenario, rig, t, with_agents
    )

    if rig.kind == "rgb":
        tex = _ground_texture(scenario.seed)
        img = np.empty(s_best.shape + (3,))
        img[:] = _SKY
        grounded = np.isfinite(s_background) & ~on_wall
        tx = gx / _TEXTURE_METERS_PER_TEXEL
        ty = gy / _TEXTURE_METERS_PER_TEXEL
        for ch in range(3):
            sampled = ndimage.map_coordinates(
                tex[:, :, ch],
                [np.where(grounded, ty, 0.0), np.where(grounded, tx, 0.0)],
                order=1,
                mode="grid-wrap",
            )
            img[:, :, ch] = np.where(grounded, sampled, _SKY[ch])
        img[on_wall] = _WALL_COLOR
        for idx, agent in enumerate(scenario.agents):
            sel = winner == idx
            if sel.any():
                img[sel] = agent.albedo
        if with_noise and scenario.noise_sigma > 0:
            rng = np.random.default_rng([scenario.seed, cam_idx, t, 1])
            img = img + rng.normal(0.0, scenario.noise_sigma, img.shape)
        return ColorImage(np.clip(img, 0.0, 1.0))

    depth = np.where(np.isfinite(s_best) & (s_best <= scenario.max_range), s_best, 0.0)
    if with_noise and scenario.noise_sigma > 0:
        rng = np.random.default_rng([scenario.seed, cam_idx, t, 2])
        noise = rng.normal(0.0, scenario.noise_sigma, depth.shape)
        valid = depth > 0
        depth = np.where(valid, np.clip(depth + noise, 1e-3, scenario.max_range), 0.0)
    return DepthImage(depth, max_range=scenario.max_range)


def render_frame(scenario: Scenario, camera: CameraRig | int, t: int):
    """Render one camera frame at frame index t (noise included)."""
    rig = scenario.cameras[camera] if isinstance(camera, int) else camera
    if not (0 <= t < scenario.frame_count):
        raise ValueError(f"frame index {t} out of range [0, {scenario.frame_count})")
    return _render(scenario, rig, t, with_agents=True, with_noise=True)


def render_background(scenario: Scenario, camera: CameraRig | int):
    """Noise-free empty-scene render, used as the user-set background."""
    rig = scenario.cameras[camera] if isinstance(camera, int) else camera
    return _render(scenario, rig, 0, with_agents=False, with_noise=False)


def ground_truth_footprint(scenario: Scenario, spec: GridSpec, t: int) -> BinaryMask:
    """Rasterize every present agent's footprint disc onto the grid.

    A cell is true iff its center lies within the disc.
    """
    if not (0 <= t < scenario.frame_count):
        raise ValueError(f"frame index {t} out of range [0, {scenario.frame_count})")
    out = np.zeros(spec.shape, dtype=bool)
    cx = spec.origin_x + (np.arange(spec.cols) + 0.5) * spec.cell_size
    cy = spec.origin_y + (np.arange(spec.rows) + 0.5) * spec.cell_size
    xx, yy = np.meshgrid(cx, cy)
    for agent in scenario.agents:
        pos = agent.position(t)
        if pos is None:
            continue
        out |= (xx - pos[0]) ** 2 + (yy - pos[1]) ** 2 <= agent.radius**2
    return BinaryMask(out)


def grid_for(scenario: Scenario, cell_size: float = 0.05) -> GridSpec:
    """Grid spanning the scenario's world extent at the given resolution."""
    ex, ey = scenario.extent
    return GridSpec(
        origin_x=0.0,
        origin_y=0.0,
        cell_size=cell_size,
        cols=int(math.ceil(ex / cell_size)),
        rows=int(math.ceil(ey / cell_size)),
    )


def _arc_cameras(
    extent,
    angles_deg,
    height=7.0,
    radius=4.5,
    resolution=(240, 180),
    fov_deg=62.0,
):
    """Cameras on a circle around the scene center at given azimuths,
    looking at the center.  High mounting keeps the base ellipses open
    so moving agents leave usable motion-parallel edge arcs."""
    ex, ey = extent
    cx, cy = ex / 2.0, ey / 2.0
    rigs = []
    for a in angles_deg:
        ang = math.radians(a)
        eye = (cx + radius * math.cos(ang), cy + radius * math.sin(ang), height)
        rigs.append(rgb_rig(eye, (cx, cy, 0.0), resolution=resolution, fov_deg=fov_deg))
    return tuple(rigs)


def standard_scenarios() -> list[Scenario]:
    """The five seeded scenarios the acceptance suite runs end to end."""
    scenarios = []

    # Two agents crossing paths; exercises per-component flow directions.
    scenarios.append(
        Scenario(
            name="crossing",
            extent=(10.0, 8.0),
            agents=(
                Agent(0.3, 1.7, (0.95, 0.85, 0.25), ((2.0, 2.5, 0), (8.0, 5.5, 60))),
                Agent(
                    0.3,
                    1.7,
                    (0.08, 0.12, 0.45),
                    ((8.0, 2.5, 0), (8.0, 2.5, 10), (2.0, 5.5, 60)),
                ),
            ),
            cameras=_arc_cameras((10.0, 8.0), (45.0, 135.0)),
            frame_count=61,
            seed=11,
        )
    )

    # One loiterer standing still, one walker pacing the hall.
    scenarios.append(
        Scenario(
            name="loiter",
            extent=(10.0, 8.0),
            agents=(
                Agent(0.3, 1.7, (0.95, 0.9, 0.3), ((7.0, 5.2, 0), (7.0, 5.2, 220))),
                Agent(
                    0.3,
                    1.7,
                    (0.05, 0.3, 0.1),
                    ((2.0, 2.0, 0), (8.0, 2.0, 70), (2.0, 3.0, 150), (8.0, 2.0, 220)),
                ),
            ),
            cameras=_arc_cameras((10.0, 8.0), (45.0, 135.0)),
            frame_count=221,
            seed=12,
        )
    )

    # Eight agents converging on the scene center, three cameras.
    # Albedos alternate dark/bright so every silhouette keeps luma
    # contrast against the mid-gray ground.
    palette = [
        (0.9, 0.05, 0.1),
        (0.95, 0.9, 0.3),
        (0.1, 0.1, 0.5),
        (0.7, 1.0, 0.95),
        (0.25, 0.05, 0.05),
        (1.0, 0.75, 0.6),
        (0.05, 0.25, 0.1),
        (0.9, 0.95, 0.95),
    ]
    crowd_agents = []
    for k in range(8):
        ang = 2.0 * math.pi * k / 8.0
        sx = 6.0 + 3.6 * math.cos(ang)
        sy = 6.0 + 3.6 * math.sin(ang)
        tx = 6.0 + 2.1 * math.cos(ang + 0.3)
        ty = 6.0 + 2.1 * math.sin(ang + 0.3)
        crowd_agents.append(
            Agent(0.28, 1.7, palette[k], ((sx, sy, 0), (tx, ty, 90), (tx, ty, 120)))
        )
    scenarios.append(
        Scenario(
            name="crowd",
            extent=(12.0, 12.0),
            agents=tuple(crowd_agents),
            cameras=_arc_cameras(
                (12.0, 12.0), (30.0, 150.0, 270.0), height=9.0, radius=6.5
            ),
            frame_count=121,
            seed=13,
            min_votes=2,
        )
    )

    # Single time-of-flight camera watching one walker in a walled room.
    scenarios.append(
        Scenario(
            name="depth-walk",
            extent=(6.0, 5.0),
            agents=(
                Agent(0.2, 1.6, (0.5, 0.5, 0.5), ((2.0, 1.3, 0), (4.2, 3.4, 150))),
            ),
            cameras=(
                depth_rig(
                    eye=(3.0, 1.7, 0.2),
                    target=(3.0, 0.8, 2.6),
                    resolution=(176, 144),
                    fov_deg=58.0,
                ),
            ),
            frame_count=151,
            seed=14,
            back_wall_z=4.2,
        )
    )

    # A pedestrian deposits a bag mid-sequence and walks away.
    scenarios.append(
        Scenario(
            name="dropbag",
            extent=(10.0, 8.0),
            agents=(
                Agent(
                    0.3,
                    1.7,
                    (0.08, 0.15, 0.5),
                    (
                        (1.5, 4.0, 0),
                        (5.0, 4.0, 50),
                        (5.0, 4.0, 70),
                        (8.0, 6.0, 130),
                        (8.0, 6.0, 199),
                    ),
                ),
                Agent(0.24, 0.5, (0.95, 0.8, 0.2), ((5.7, 4.0, 60), (5.7, 4.0, 199))),
            ),
            cameras=_arc_cameras((10.0, 8.0), (45.0, 135.0)),
            frame_count=200,
            seed=15,
        )
    )
    return scenarios


def scenario_by_name(name: str) -> Scenario:
    for s in standard_scenarios():
        if s.name == name:
            return s
    names = ", ".join(s.name for s in standard_scenarios())
    raise KeyError(f"unknown scenario {name!r}; valid names: {names}")
