"""Ground-truth synthetic datasets built from colored planar patches.

A scene is a list of rectangles (origin, two orthonormal in-plane axes,
extents, albedo) plus a ground-truth trajectory of LiDAR poses. For every
pose a raster LiDAR scan is ray-cast against the patches and a camera image
is rendered by casting one ray per pixel through the same camera model.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .camera import CameraModel, Image, save_calibration, save_image, undistort
from .cloud import PointCloud
from .io import ManifestEntry, Trajectory
from .se3 import PoseSE3, exp_se3, so3_exp

log = logging.getLogger(__name__)

SCAN_PERIOD_NS = 100_000_000
IMAGE_OFFSET_NS = 3_000_000


@dataclass(frozen=True)
class Patch:
    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    extent_u: float
    extent_v: float
    albedo: tuple = (200, 200, 200)
    tile: float = 0.0  # > 0 paints a deterministic tiling from ``palette``
    palette: tuple = ()

    def __post_init__(self):
        u = np.asarray(self.u_axis, float)
        v = np.asarray(self.v_axis, float)
        u = u / np.linalg.norm(u)
        v = v - (v @ u) * u
        v = v / np.linalg.norm(v)
        object.__setattr__(self, "origin", np.asarray(self.origin, float))
        object.__setattr__(self, "u_axis", u)
        object.__setattr__(self, "v_axis", v)
        object.__setattr__(self, "albedo", tuple(int(c) for c in self.albedo))
        object.__setattr__(self, "palette", tuple(tuple(int(c) for c in p) for p in self.palette))

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.u_axis, self.v_axis)

    def color_at(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.empty((len(a), 3), np.uint8)
        out[:] = self.albedo
        if self.tile > 0 and self.palette:
            i = np.floor(a / self.tile).astype(np.int64)
            j = np.floor(b / self.tile).astype(np.int64)
            pal = np.array(self.palette, np.uint8)
            out[:] = pal[(i * 7 + j * 13) % len(pal)]
        return out

    def to_dict(self) -> dict:
        d = {
            "origin": self.origin.tolist(),
            "u_axis": self.u_axis.tolist(),
            "v_axis": self.v_axis.tolist(),
            "extent_u": self.extent_u,
            "extent_v": self.extent_v,
            "albedo_rgb": list(self.albedo),
        }
        if self.tile > 0:
            d["tile"] = self.tile
            d["palette"] = [list(p) for p in self.palette]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Patch":
        return cls(
            d["origin"], d["u_axis"], d["v_axis"], float(d["extent_u"]), float(d["extent_v"]),
            tuple(d.get("albedo_rgb", (200, 200, 200))), float(d.get("tile", 0.0)),
            tuple(tuple(p) for p in d.get("palette", ())),
        )


@dataclass
class SyntheticScene:
    patches: list
    timestamps: list = field(default_factory=list)  # ns
    poses: list = field(default_factory=list)  # LiDAR-to-world

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        corners = []
        for p in self.patches:
            for a in (0.0, p.extent_u):
                for b in (0.0, p.extent_v):
                    corners.append(p.origin + a * p.u_axis + b * p.v_axis)
        c = np.array(corners)
        return c.min(axis=0), c.max(axis=0)

    def trajectory(self) -> Trajectory:
        return Trajectory(list(self.timestamps), list(self.poses))


@dataclass(frozen=True)
class LidarSpec:
    fov_horizontal_deg: float = 70.4
    fov_vertical_deg: float = 77.2
    lines: int = 64
    points_per_line: int = 200
    range_noise: float = 0.005
    max_range: float = 60.0
    line_period_s: float = 0.1 / 64
    stagger: bool = True  # shift each line's azimuths so beams do not stack into columns


def default_camera() -> CameraModel:
    # camera 5 cm above the LiDAR, optical axis along the LiDAR x axis
    R = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    c = np.array([0.0, 0.0, 0.05])
    return CameraModel(
        fx=228.5, fy=228.5, cx=159.5, cy=99.5, width=320, height=200,
        distortion=(-0.05, 0.01, 0.001, -0.001, 0.0),
        T_CL=PoseSE3(R, -R @ c),
    )


# --- ray casting ----------------------------------------------------------


def raycast(patches, origin, dirs) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Nearest hit per ray: ``(t, patch_index, u_coord, v_coord)``; ``t`` is inf on a miss."""
    origin = np.asarray(origin, float)
    dirs = np.asarray(dirs, float)
    n = len(dirs)
    best_t = np.full(n, np.inf)
    best_i = np.full(n, -1)
    best_a = np.zeros(n)
    best_b = np.zeros(n)
    for k, p in enumerate(patches):
        nrm = p.normal
        denom = dirs @ nrm
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((p.origin - origin) @ nrm) / denom
        cand = (np.abs(denom) > 1e-12) & (t > 1e-9) & (t < best_t)
        if not cand.any():
            continue
        idx = np.flatnonzero(cand)
        rel = origin + t[idx, None] * dirs[idx] - p.origin
        a = rel @ p.u_axis
        b = rel @ p.v_axis
        inside = (a >= 0) & (a <= p.extent_u) & (b >= 0) & (b <= p.extent_v)
        idx = idx[inside]
        best_t[idx] = t[idx]
        best_i[idx] = k
        best_a[idx] = a[inside]
        best_b[idx] = b[inside]
    return best_t, best_i, best_a, best_b


def hit_colors(patches, idx, a, b) -> np.ndarray:
    out = np.zeros((len(idx), 3), np.uint8)
    for k in np.unique(idx[idx >= 0]):
        sel = idx == k
        out[sel] = patches[k].color_at(a[sel], b[sel])
    return out


def sample_surfaces(patches, step: float, margin: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Grid samples on every patch, ``step`` apart, skipping a border of width ``margin``.

    Returns the points and the index of the patch each came from.
    """
    pts, owner = [], []
    for k, p in enumerate(patches):
        a = np.arange(margin + step / 2, p.extent_u - margin, step)
        b = np.arange(margin + step / 2, p.extent_v - margin, step)
        A, B = np.meshgrid(a, b, indexing="ij")
        pts.append(p.origin + A.reshape(-1, 1) * p.u_axis + B.reshape(-1, 1) * p.v_axis)
        owner.append(np.full(A.size, k))
    return np.concatenate(pts).reshape(-1, 3), np.concatenate(owner)


def scan_directions(spec: LidarSpec) -> np.ndarray:
    """Unit beam directions in the LiDAR frame, line-major acquisition order."""
    hh = np.radians(spec.fov_horizontal_deg) / 2
    hv = np.radians(spec.fov_vertical_deg) / 2
    el = np.linspace(hv, -hv, spec.lines)
    az = np.linspace(hh, -hh, spec.points_per_line)
    E, A = np.meshgrid(el, az, indexing="ij")
    if spec.stagger and spec.points_per_line > 1:
        step = 2 * hh / (spec.points_per_line - 1)
        shift = (np.arange(spec.lines) * 0.6180339887498949) % 1.0 - 0.5
        A = np.clip(A + shift[:, None] * step, -hh, hh)
    d = np.stack([np.cos(E) * np.cos(A), np.cos(E) * np.sin(A), np.sin(E)], axis=-1)
    return d.reshape(-1, 3)


def simulate_scan(scene: SyntheticScene, pose: PoseSE3, spec: LidarSpec, rng, timestamp: int = 0,
                  noise: float | None = None) -> PointCloud:
    dirs_l = scan_directions(spec)
    dirs_w = dirs_l @ pose.rotation.T
    t, idx, a, b = raycast(scene.patches, pose.translation, dirs_w)
    hit = np.isfinite(t) & (t <= spec.max_range)
    sigma = spec.range_noise if noise is None else noise
    rng_t = t[hit] + (rng.normal(0.0, sigma, size=hit.sum()) if sigma > 0 else 0.0)
    xyz = dirs_l[hit] * rng_t[:, None]
    normals = np.array([scene.patches[k].normal for k in idx[hit]]).reshape(-1, 3)
    cos_inc = np.abs(np.einsum("ij,ij->i", dirs_w[hit], normals))
    albedo = hit_colors(scene.patches, idx[hit], a[hit], b[hit]).astype(float)
    reflect = 0.2 + 0.8 * albedo.mean(axis=1) / 255.0
    order = np.flatnonzero(hit)
    times = (order // spec.points_per_line) * spec.line_period_s
    if not hit.any():
        log.warning("empty scan at %d: no surface hits", timestamp)
    cloud = PointCloud(xyz, reflect * cos_inc, time=times, timestamp=timestamp)
    cloud.extras["patch"] = idx[hit]
    return cloud


def render_image(scene: SyntheticScene, pose: PoseSE3, cam: CameraModel, timestamp: int = 0) -> Image:
    """Noise-free render: one ray through each pixel center, flat albedo shading."""
    cols, rows = np.meshgrid(np.arange(cam.width), np.arange(cam.height))
    xy_d = np.stack([(cols.ravel() - cam.cx) / cam.fx, (rows.ravel() - cam.cy) / cam.fy], axis=1)
    xy = undistort(cam, xy_d)
    rays_c = np.concatenate([xy, np.ones((len(xy), 1))], axis=1)
    T_LC = cam.T_CL.inverse()
    cam_to_world = pose @ T_LC
    dirs_w = rays_c @ cam_to_world.rotation.T
    dirs_w /= np.linalg.norm(dirs_w, axis=1, keepdims=True)
    _, idx, a, b = raycast(scene.patches, cam_to_world.translation, dirs_w)
    pix = hit_colors(scene.patches, idx, a, b)
    return Image(pix.reshape(cam.height, cam.width, 3), timestamp)


def inject_outliers(scan: PointCloud, fraction: float, seed, low=None, high=None,
                    pose: PoseSE3 | None = None) -> PointCloud:
    """Replace ``round(fraction * N)`` random points with uniform samples.

    Samples are drawn in the axis-aligned box ``[low, high]`` (world frame
    when ``pose`` is given, otherwise the scan frame; defaults to the scan's
    own bounding box) and expressed back in the scan frame.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError("outlier fraction must lie in [0, 1)")
    n = len(scan)
    count = int(round(fraction * n))
    if count == 0:
        return scan
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if low is None or high is None:
        low, high = scan.xyz.min(axis=0), scan.xyz.max(axis=0)
    idx = np.sort(rng.choice(n, size=count, replace=False))
    pts = rng.uniform(low, high, size=(count, 3))
    if pose is not None:
        pts = pose.inverse().apply(pts)
    xyz = scan.xyz.copy()
    xyz[idx] = pts
    out = PointCloud(xyz, scan.intensity, scan.rgb, scan.has_color, scan.time, scan.timestamp, dict(scan.extras))
    mask = np.zeros(n, bool)
    mask[idx] = True
    out.extras["outlier"] = mask
    return out


# --- scenes ---------------------------------------------------------------

PALETTE = (
    (200, 40, 40), (40, 160, 60), (40, 70, 200), (220, 200, 40),
    (160, 60, 180), (40, 180, 190), (230, 130, 30), (120, 120, 120),
)


def _rect(origin, u, v, eu, ev, albedo, tile=0.0, palette=()):
    return Patch(np.asarray(origin, float), np.asarray(u, float), np.asarray(v, float), eu, ev, albedo, tile, palette)


def box(lo, hi, albedo, bottom=False, top=True) -> list:
    """Axis-aligned box as up to six outward-facing rectangles."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    dx, dy, dz = hi - lo
    X, Y, Z = np.eye(3)
    out = [
        _rect(lo, Y, Z, dy, dz, albedo),  # -x face
        _rect([hi[0], lo[1], lo[2]], Y, Z, dy, dz, albedo),  # +x face
        _rect(lo, X, Z, dx, dz, albedo),  # -y face
        _rect([lo[0], hi[1], lo[2]], X, Z, dx, dz, albedo),  # +y face
    ]
    if top:
        out.append(_rect([lo[0], lo[1], hi[2]], X, Y, dx, dy, albedo))
    if bottom:
        out.append(_rect(lo, X, Y, dx, dy, albedo))
    return out


def room(lo, hi, tile: float = 1.0, palette=PALETTE) -> list:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    dx, dy, dz = hi - lo
    X, Y, Z = np.eye(3)
    pal = tuple(palette)
    return [
        _rect(lo, X, Y, dx, dy, (150, 150, 150), tile, pal),  # floor
        _rect([lo[0], lo[1], hi[2]], X, Y, dx, dy, (230, 230, 230), tile, pal[::-1]),  # ceiling
        _rect(lo, X, Z, dx, dz, (180, 90, 90), tile, pal[2:] + pal[:2]),  # y = lo wall
        _rect([lo[0], hi[1], lo[2]], X, Z, dx, dz, (90, 90, 180), tile, pal[4:] + pal[:4]),  # y = hi wall
        _rect(lo, Y, Z, dy, dz, (90, 180, 90), tile, pal[1:] + pal[:1]),  # x = lo wall
        _rect([hi[0], lo[1], lo[2]], Y, Z, dy, dz, (200, 200, 90), tile, pal[3:] + pal[:3]),  # x = hi wall
    ]


def corridor_scene() -> list:
    """A closed hall with pillars, crates and hanging panels for edges and corners."""
    patches = room([-3.0, -3.0, -1.2], [16.0, 3.0, 2.0])
    pal = PALETTE
    for k, x in enumerate(np.arange(1.0, 15.0, 2.5)):
        patches += box([x, -3.0, -1.2], [x + 0.5, -2.4, 2.0], pal[k % 8], top=False)
        patches += box([x + 1.2, 2.3, -1.2], [x + 1.7, 3.0, 2.0], pal[(k + 3) % 8], top=False)
    crates = [([3.0, -0.9, -1.2], [3.8, -0.1, -0.5]), ([6.5, 0.6, -1.2], [7.3, 1.5, -0.2]),
              ([9.5, -1.6, -1.2], [10.5, -0.7, -0.7]), ([12.5, 0.2, -1.2], [13.2, 1.2, 0.1]),
              ([5.0, 1.2, -1.2], [5.6, 2.0, 0.4])]
    for k, (lo, hi) in enumerate(crates):
        patches += box(lo, hi, pal[(k + 5) % 8])
    X, Y, Z = np.eye(3)
    for k, x in enumerate((4.0, 8.0, 11.5)):
        patches.append(_rect([x, -1.0 + 0.4 * k, 0.9], Y, Z, 1.2, 0.7, pal[(k + 1) % 8]))
    return patches


def hall_scene() -> list:
    """A large tiled room with big blocks, slanted panels and a ramp.

    Surfaces are large relative to the scan spacing and face the sensor
    from many directions, which keeps every pose direction well observed.
    """
    patches = room([-4.0, -5.0, -1.5], [14.0, 5.0, 2.5], tile=0.8)
    pal = PALETTE
    X, Y, Z = np.eye(3)
    patches += box([7.0, -5.0, -1.5], [9.0, -2.5, 2.5], pal[0], top=False)
    patches += box([9.5, 2.0, -1.5], [11.5, 5.0, 1.0], pal[2])
    patches += box([11.5, -1.0, -1.5], [12.5, 0.5, 0.2], pal[5])
    for origin, yaw, color in (([4.5, 2.2, -1.5], 35.0, pal[3]), ([5.0, -2.0, -1.5], -40.0, pal[4])):
        u = np.array([np.cos(np.radians(yaw)), np.sin(np.radians(yaw)), 0.0])
        patches.append(_rect(origin, u, Z, 2.2, 3.2, color, 0.5, pal[1:4]))
    ramp_u = np.array([2.5, 0.0, 0.7])
    patches.append(_rect([6.0, -0.5, -1.5], ramp_u, Y, float(np.linalg.norm(ramp_u)), 2.0, pal[6], 0.5, pal[4:]))
    patches.append(_rect([9.0, -2.5, 1.6], X, Y, 2.0, 1.8, pal[1]))  # suspended slab
    return patches


def hall_trajectory(n: int = 50, length: float = 4.0, period: int = 50) -> list:
    """Starts and ends at rest; gentle sway in y, z and heading.

    The path is laid out over ``period`` scans, so shorter sequences are
    prefixes with the same per-scan motion.
    """
    poses = []
    for k in range(n):
        s = k / (period - 1)
        x = length * (s - np.sin(2 * np.pi * s) / (2 * np.pi))
        y = 0.4 * np.sin(2 * np.pi * s) * np.sin(np.pi * s)
        z = 0.08 * np.sin(2 * np.pi * s) ** 2
        yaw = np.radians(8.0) * np.sin(2 * np.pi * s)
        pitch = np.radians(2.0) * np.sin(np.pi * s) ** 2
        roll = np.radians(1.5) * np.sin(2 * np.pi * s)
        R = so3_exp([0, 0, yaw]) @ so3_exp([0, pitch, 0]) @ so3_exp([roll, 0, 0])
        poses.append(PoseSE3(R, [x, y, z]))
    return poses


def corridor_trajectory(n: int = 50, step: float = 0.1, period: int = 50) -> list:
    poses = []
    for k in range(n):
        s = k / (period - 1)
        x = step * k
        y = 0.3 * np.sin(2 * np.pi * s)
        z = 0.05 * np.sin(4 * np.pi * s)
        yaw = np.radians(6.0) * np.sin(2 * np.pi * s + 0.5)
        pitch = np.radians(2.0) * np.sin(3 * np.pi * s)
        roll = np.radians(1.5) * np.cos(2 * np.pi * s)
        R = so3_exp([0, 0, yaw]) @ so3_exp([0, pitch, 0]) @ so3_exp([roll, 0, 0])
        poses.append(PoseSE3(R, [x, y, z]))
    return poses


def twin_scene(offset: float = 0.5) -> tuple[list, list, list]:
    """Gray context plus two congruent panel pairs, red and blue, ``offset`` apart along x.

    Returns ``(context, red, blue)`` patch lists. Geometry alone cannot tell
    the pairs apart once a pose estimate sits between them.
    """
    X, Y, Z = np.eye(3)
    tilt = np.array([np.cos(np.pi / 4), np.sin(np.pi / 4), 0.0])

    def pair(shift, color):
        s = np.array([shift, 0.0, 0.0])
        return [_rect(np.array([3.0, -1.5, -1.0]) + s, Y, Z, 1.2, 2.0, color),
                _rect(np.array([3.0, 0.5, -1.0]) + s, tilt, Z, 1.2, 2.0, color)]

    gray = (128, 128, 128)
    context = [_rect([0.0, -3.0, -1.0], X, Y, 6.0, 6.0, gray), _rect([0.0, -3.0, -1.0], X, Z, 6.0, 2.5, gray)]
    return context, pair(0.0, (200, 40, 40)), pair(offset, (40, 60, 200))


def surface_cloud(patches, step: float, noise: float = 0.0, rng=None) -> PointCloud:
    """Colored grid samples of ``patches`` with optional isotropic jitter."""
    xyz, owner = sample_surfaces(patches, step)
    rgb = hit_colors(patches, owner, *_patch_coords(patches, owner, xyz))
    if noise > 0:
        xyz = xyz + rng.normal(scale=noise, size=xyz.shape)
    return PointCloud(xyz, rgb=rgb, has_color=np.ones(len(xyz), bool))


def _patch_coords(patches, owner, xyz):
    a = np.empty(len(xyz))
    b = np.empty(len(xyz))
    for k in np.unique(owner):
        sel = owner == k
        rel = xyz[sel] - patches[k].origin
        a[sel], b[sel] = rel @ patches[k].u_axis, rel @ patches[k].v_axis
    return a, b


def make_scene(name: str = "hall", scans: int = 50) -> SyntheticScene:
    if name == "hall":
        patches = hall_scene()
        poses = hall_trajectory(scans)
    elif name == "corridor":
        patches = corridor_scene()
        poses = corridor_trajectory(scans)
    elif name == "wall":
        patches = [_rect([4.0, -10.0, -10.0], [0, 1, 0], [0, 0, 1], 20.0, 20.0, (255, 0, 0))]
        poses = [exp_se3([0.05 * k, 0, 0, 0, 0, 0]) for k in range(scans)]
    else:
        raise ValueError(f"unknown scene preset {name!r}")
    stamps = [1_000_000_000 + k * SCAN_PERIOD_NS for k in range(len(poses))]
    return SyntheticScene(patches, stamps, poses)


def scene_to_dict(scene: SyntheticScene) -> dict:
    return {
        "patches": [p.to_dict() for p in scene.patches],
        "trajectory": [
            {"timestamp_ns": int(ts), "matrix": T.matrix().reshape(-1).tolist()}
            for ts, T in zip(scene.timestamps, scene.poses)
        ],
    }


def scene_from_dict(d: dict) -> SyntheticScene:
    patches = [Patch.from_dict(p) for p in d["patches"]]
    stamps, poses = [], []
    traj = d.get("trajectory", [])
    if isinstance(traj, dict) and "waypoints" in traj:
        stamps, poses = _interpolate_waypoints(traj["waypoints"], int(traj.get("scans", 50)))
    else:
        for w in traj:
            stamps.append(int(w["timestamp_ns"]))
            poses.append(PoseSE3.from_matrix(np.asarray(w["matrix"], float).reshape(4, 4)))
    if any(b <= a for a, b in zip(stamps, stamps[1:])):
        raise ValueError("scene trajectory timestamps must be strictly increasing")
    return SyntheticScene(patches, stamps, poses)


def _interpolate_waypoints(waypoints, scans: int):
    """Waypoints ``{"position": [x,y,z], "yaw_deg": a}`` sampled evenly into ``scans`` poses."""
    pos = np.array([w["position"] for w in waypoints], float)
    yaw = np.radians([w.get("yaw_deg", 0.0) for w in waypoints])
    s = np.linspace(0, len(waypoints) - 1, scans)
    stamps, poses = [], []
    for k, sk in enumerate(s):
        p = np.array([np.interp(sk, np.arange(len(pos)), pos[:, i]) for i in range(3)])
        a = np.interp(sk, np.arange(len(yaw)), yaw)
        stamps.append(1_000_000_000 + k * SCAN_PERIOD_NS)
        poses.append(PoseSE3(so3_exp([0, 0, a]), p))
    return stamps, poses


def load_scene(path_or_name, scans: int = 50) -> SyntheticScene:
    """Scene JSON file, or a built-in preset name (``scans`` applies to presets only)."""
    p = Path(str(path_or_name))
    if p.suffix.lower() == ".json" or p.exists():
        with open(p, encoding="utf-8") as f:
            return scene_from_dict(json.load(f))
    return make_scene(str(path_or_name), scans)


# --- datasets -------------------------------------------------------------


@dataclass
class Dataset:
    scene: SyntheticScene
    camera: CameraModel
    scans: list
    images: list
    ground_truth: Trajectory


def generate(scene: SyntheticScene, camera: CameraModel | None = None, lidar: LidarSpec = LidarSpec(),
             seed: int = 0, outlier_fraction: float = 0.0, images: bool = True,
             noise: float | None = None) -> Dataset:
    """Simulate scans (and images) along the scene trajectory."""
    camera = camera or default_camera()
    rng = np.random.default_rng(seed)
    lo, hi = scene.bounds()
    scans, imgs = [], []
    for ts, T in zip(scene.timestamps, scene.poses):
        scan = simulate_scan(scene, T, lidar, rng, ts, noise)
        if outlier_fraction > 0:
            scan = inject_outliers(scan, outlier_fraction, rng, lo, hi, pose=T)
        scans.append(scan)
        if images:
            imgs.append(render_image(scene, T, camera, ts + IMAGE_OFFSET_NS))
    return Dataset(scene, camera, scans, imgs, scene.trajectory())


def write_dataset(ds: Dataset, out) -> Path:
    """Write scans, images, calibration, manifest and TUM ground truth under ``out``."""
    out = Path(out)
    (out / "scans").mkdir(parents=True, exist_ok=True)
    entries = []
    for k, scan in enumerate(ds.scans):
        p = out / "scans" / f"{k:06d}.ply"
        io.write_scan_ply(p, scan)
        entries.append(ManifestEntry("lidar", scan.timestamp, p))
    if ds.images:
        (out / "images").mkdir(parents=True, exist_ok=True)
        for k, img in enumerate(ds.images):
            p = out / "images" / f"{k:06d}.png"
            save_image(img, p)
            entries.append(ManifestEntry("image", img.timestamp, p))
    entries.sort(key=lambda e: (e.timestamp, e.kind))
    io.write_manifest(out / "manifest.csv", entries)
    save_calibration(ds.camera, out / "calib.json")
    io.write_tum(out / "groundtruth.txt", ds.ground_truth)
    with open(out / "scene.json", "w", encoding="utf-8") as f:
        json.dump(scene_to_dict(ds.scene), f)
    return out
