"""Pinhole camera with radial-tangential distortion, and point colorization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .se3 import PoseSE3, is_rotation

Z_MIN = 0.01


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    distortion: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)  # k1, k2, p1, p2, k3
    T_CL: PoseSE3 = field(default_factory=PoseSE3.identity)
    z_min: float = Z_MIN

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image size must be positive")
        if len(self.distortion) != 5:
            raise ValueError("distortion needs 5 coefficients (k1, k2, p1, p2, k3)")
        object.__setattr__(self, "distortion", tuple(float(c) for c in self.distortion))
        if not is_rotation(self.T_CL.rotation, 1e-6):
            raise ValueError("T_CL rotation is not a valid rotation matrix")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "distortion": list(self.distortion),
            "T_CL": self.T_CL.matrix().reshape(-1).tolist(),
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        try:
            T = np.asarray(d["T_CL"], dtype=float).reshape(4, 4)
            return cls(
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                cx=float(d["cx"]),
                cy=float(d["cy"]),
                width=int(d["width"]),
                height=int(d["height"]),
                distortion=tuple(d.get("distortion", (0.0,) * 5)),
                T_CL=PoseSE3.from_matrix(T),
            )
        except (KeyError, TypeError) as e:
            raise ValueError(f"malformed calibration: {e}") from e


def load_calibration(path) -> CameraModel:
    with open(path, encoding="utf-8") as f:
        return CameraModel.from_dict(json.load(f))


def save_calibration(model: CameraModel, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model.to_dict(), f, indent=2)


@dataclass(frozen=True)
class Image:
    pixels: np.ndarray  # (height, width, 3) uint8
    timestamp: int = 0

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def load_image(path, timestamp: int = 0) -> Image:
    """Read a PNG or binary PPM as 8-bit RGB."""
    from PIL import Image as PILImage

    with PILImage.open(path) as im:
        return Image(np.asarray(im.convert("RGB"), dtype=np.uint8).copy(), timestamp)


def save_image(img: Image, path) -> None:
    from PIL import Image as PILImage

    PILImage.fromarray(np.ascontiguousarray(img.pixels, dtype=np.uint8), "RGB").save(path)


def lidar_to_camera(model: CameraModel, points) -> np.ndarray:
    return model.T_CL.apply(points)


def distort(model: CameraModel, xy: np.ndarray) -> np.ndarray:
    """Apply radial-tangential distortion to normalized coordinates ``(N, 2)``."""
    k1, k2, p1, p2, k3 = model.distortion
    x, y = xy[..., 0], xy[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return np.stack([xd, yd], axis=-1)


def undistort(model: CameraModel, xy_d: np.ndarray, iterations: int = 30) -> np.ndarray:
    """Fixed-point inverse of :func:`distort`; adequate for mild distortion."""
    xy_d = np.asarray(xy_d, dtype=float)
    xy = xy_d.copy()
    for _ in range(iterations):
        xy = xy + (xy_d - distort(model, xy))
    return xy


def project(model: CameraModel, cam_points) -> tuple[np.ndarray, np.ndarray]:
    """Project camera-frame points to pixels.

    Returns ``(uv, valid)`` where ``uv`` has shape ``(N, 2)`` and ``valid``
    marks points in front of the camera whose pixel lies inside
    ``[0, width) x [0, height)``. ``uv`` is NaN where invalid.
    """
    cp = np.atleast_2d(np.asarray(cam_points, dtype=float))
    z = cp[:, 2]
    front = z > model.z_min
    safe_z = np.where(front, z, 1.0)
    xy = cp[:, :2] / safe_z[:, None]
    xy_d = distort(model, xy)
    u = model.fx * xy_d[:, 0] + model.cx
    v = model.fy * xy_d[:, 1] + model.cy
    valid = front & (u >= 0) & (u < model.width) & (v >= 0) & (v < model.height)
    uv = np.stack([u, v], axis=1)
    uv[~valid] = np.nan
    return uv, valid


def project_point(model: CameraModel, cp) -> tuple[float, float] | None:
    uv, valid = project(model, np.asarray(cp, dtype=float).reshape(1, 3))
    if not valid[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1])


def sample_colors(model: CameraModel, img: Image, lidar_points) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-pixel colors for LiDAR-frame points.

    Returns ``(rgb, has_color)``; rows without a valid projection are zero.
    """
    pts = np.atleast_2d(np.asarray(lidar_points, dtype=float))
    if pts.shape[0] == 0:
        return np.zeros((0, 3), np.uint8), np.zeros(0, bool)
    if (img.width, img.height) != (model.width, model.height):
        raise ValueError(
            f"image is {img.width}x{img.height}, calibration expects {model.width}x{model.height}"
        )
    uv, valid = project(model, lidar_to_camera(model, pts))
    rgb = np.zeros((len(pts), 3), np.uint8)
    if valid.any():
        # round half up; clamp covers u in [width - 0.5, width)
        cols = np.minimum(np.floor(uv[valid, 0] + 0.5).astype(int), model.width - 1)
        rows = np.minimum(np.floor(uv[valid, 1] + 0.5).astype(int), model.height - 1)
        rgb[valid] = img.pixels[rows, cols]
    return rgb, valid


def colorize(model: CameraModel, img: Image, cloud):
    """Colored subset of ``cloud`` (a :class:`~carloam.cloud.PointCloud`), order kept."""
    rgb, valid = sample_colors(model, img, cloud.xyz)
    out = cloud.with_colors(rgb, valid)
    return out.subset(valid)

