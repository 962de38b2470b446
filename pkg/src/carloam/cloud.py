"""Struct-of-arrays point cloud used throughout the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class PointCloud:
    """Ordered LiDAR points.

    ``rgb`` rows are only meaningful where ``has_color`` is set. ``time``
    holds the optional per-point acquisition time in seconds relative to
    the scan stamp.
    """

    xyz: np.ndarray
    intensity: np.ndarray = None
    rgb: np.ndarray = None
    has_color: np.ndarray = None
    time: np.ndarray = None
    timestamp: int = 0
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=float).reshape(-1, 3)
        n = len(xyz)
        intensity = np.ones(n) if self.intensity is None else np.asarray(self.intensity, float).reshape(n)
        rgb = np.zeros((n, 3), np.uint8) if self.rgb is None else np.asarray(self.rgb, np.uint8).reshape(n, 3)
        has = np.zeros(n, bool) if self.has_color is None else np.asarray(self.has_color, bool).reshape(n)
        t = None if self.time is None else np.asarray(self.time, float).reshape(n)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "has_color", has)
        object.__setattr__(self, "time", t)

    def __len__(self) -> int:
        return len(self.xyz)

    def subset(self, idx) -> "PointCloud":
        idx = np.asarray(idx)
        return replace(
            self,
            xyz=self.xyz[idx],
            intensity=self.intensity[idx],
            rgb=self.rgb[idx],
            has_color=self.has_color[idx],
            time=None if self.time is None else self.time[idx],
            extras={k: np.asarray(v)[idx] for k, v in self.extras.items()},
        )

    def with_colors(self, rgb, has_color) -> "PointCloud":
        return replace(self, rgb=rgb, has_color=has_color)

    def transformed(self, T) -> "PointCloud":
        return replace(self, xyz=T.apply(self.xyz))

    @classmethod
    def empty(cls, timestamp: int = 0) -> "PointCloud":
        return cls(np.zeros((0, 3)), timestamp=timestamp)

    @classmethod
    def concatenate(cls, clouds) -> "PointCloud":
        clouds = list(clouds)
        if not clouds:
            return cls.empty()
        times = None
        if all(c.time is not None for c in clouds):
            times = np.concatenate([c.time for c in clouds])
        return cls(
            np.concatenate([c.xyz for c in clouds]),
            np.concatenate([c.intensity for c in clouds]),
            np.concatenate([c.rgb for c in clouds]),
            np.concatenate([c.has_color for c in clouds]),
            times,
            clouds[0].timestamp,
        )
