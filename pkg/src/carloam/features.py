"""Edge / planar feature extraction from ordered LiDAR scans.

A scan is a time-ordered list of returns. Scan lines are recovered from
the angular step between consecutive beams, then cut into segments at
range discontinuities. Smoothness is evaluated inside a segment only;
features are picked per line sector with non-maximum suppression.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureConfig:
    window: int = 5
    sectors: int = 6
    max_edges_per_sector: int = 2
    max_planars_per_sector: int = 4
    edge_threshold: float = 0.05
    planar_threshold: float = 0.005
    blind_radius: float = 0.1
    min_intensity: float = 1e-2
    fov_horizontal_deg: float = 70.4
    fov_vertical_deg: float = 77.2
    fov_margin_deg: float = 2.0
    max_incidence_deg: float = 85.0
    gap_abs: float = 0.3
    gap_rel: float = 0.05
    fringe: int = 2
    line_split_factor: float = 3.0


@dataclass(frozen=True)
class FeatureCloud:
    edges: PointCloud
    planars: PointCloud
    timestamp: int = 0
    edge_index: np.ndarray = None  # indices into the input scan
    planar_index: np.ndarray = None

    def transformed(self, T) -> "FeatureCloud":
        return FeatureCloud(
            self.edges.transformed(T), self.planars.transformed(T), self.timestamp,
            self.edge_index, self.planar_index,
        )

    @property
    def degenerate(self) -> bool:
        return len(self.edges) < 10 and len(self.planars) < 50


# --- scan structure -------------------------------------------------------


def _beam_steps(xyz: np.ndarray) -> np.ndarray:
    """Angle between consecutive beam directions, length ``N - 1``."""
    r = np.linalg.norm(xyz, axis=1)
    u = xyz / np.where(r > 0, r, 1.0)[:, None]
    cross = np.linalg.norm(np.cross(u[:-1], u[1:]), axis=1)
    dot = np.einsum("ij,ij->i", u[:-1], u[1:])
    return np.arctan2(cross, dot)


def split_lines(xyz: np.ndarray, factor: float = 3.0) -> np.ndarray:
    """Line id per point: a new line starts where the beam step exceeds
    ``factor`` times the median step."""
    n = len(xyz)
    if n == 0:
        return np.zeros(0, int)
    if n == 1:
        return np.zeros(1, int)
    steps = _beam_steps(xyz)
    med = np.median(steps)
    breaks = steps > factor * med if med > 0 else steps > 0
    return np.concatenate([[0], np.cumsum(breaks)])


def range_jumps(xyz: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Boolean of length ``N - 1``: discontinuity between point i and i+1."""
    r = np.linalg.norm(xyz, axis=1)
    if len(r) < 2:
        return np.zeros(0, bool)
    dr = np.abs(np.diff(r))
    gap = np.maximum(cfg.gap_abs, cfg.gap_rel * np.minimum(r[:-1], r[1:]))
    return dr > gap


def segment_ids(xyz: np.ndarray, lines: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Segment id per point: lines further cut at range discontinuities."""
    if len(xyz) == 0:
        return np.zeros(0, int)
    cut = (np.diff(lines) != 0) | range_jumps(xyz, cfg)
    return np.concatenate([[0], np.cumsum(cut)])


# --- reliability ----------------------------------------------------------


def reliable_mask(scan: PointCloud, cfg: FeatureConfig = FeatureConfig(), lines=None) -> np.ndarray:
    xyz = scan.xyz
    n = len(xyz)
    keep = np.ones(n, bool)
    if n == 0:
        return keep
    r = np.linalg.norm(xyz, axis=1)
    keep &= r >= cfg.blind_radius
    keep &= scan.intensity >= cfg.min_intensity

    az = np.degrees(np.arctan2(xyz[:, 1], xyz[:, 0]))
    el = np.degrees(np.arctan2(xyz[:, 2], np.hypot(xyz[:, 0], xyz[:, 1])))
    keep &= np.abs(az) <= cfg.fov_horizontal_deg / 2 - cfg.fov_margin_deg
    keep &= np.abs(el) <= cfg.fov_vertical_deg / 2 - cfg.fov_margin_deg

    if lines is None:
        lines = split_lines(xyz, cfg.line_split_factor)
    same_line = np.diff(lines) == 0
    jumps = range_jumps(xyz, cfg) & same_line
    seg = segment_ids(xyz, lines, cfg)

    # grazing beams: angle between the beam and the local tangent along the segment
    prev_ok = np.concatenate([[False], seg[1:] == seg[:-1]])
    next_ok = np.concatenate([seg[:-1] == seg[1:], [False]])
    prev_p = np.where(prev_ok[:, None], np.roll(xyz, 1, axis=0), xyz)
    next_p = np.where(next_ok[:, None], np.roll(xyz, -1, axis=0), xyz)
    tangent = next_p - prev_p
    tn = np.linalg.norm(tangent, axis=1)
    has_t = (tn > 0) & (r > 0)
    cos_bt = np.abs(np.einsum("ij,ij->i", xyz, tangent)) / np.where(has_t, tn * r, 1.0)
    incidence = 90.0 - np.degrees(np.arccos(np.clip(cos_bt, 0.0, 1.0)))
    keep &= ~(has_t & (incidence > cfg.max_incidence_deg))

    # occlusion fringe: drop the points just beyond a jump on the far side
    for i in np.flatnonzero(jumps):
        if r[i + 1] > r[i]:
            lo, hi = i + 1, min(n, i + 1 + cfg.fringe)
            far = np.arange(lo, hi)
        else:
            far = np.arange(max(0, i + 1 - cfg.fringe), i + 1)
        far = far[lines[far] == lines[i]]
        keep[far] = False
    return keep


def select_reliable(scan: PointCloud, cfg: FeatureConfig = FeatureConfig()) -> PointCloud:
    return scan.subset(np.flatnonzero(reliable_mask(scan, cfg)))


# --- smoothness -----------------------------------------------------------


def smoothness(line_xyz, i: int, window: int = 5) -> float | None:
    """Smoothness of point ``i`` on an ordered line; ``None`` near the ends."""
    p = np.asarray(line_xyz, dtype=float)
    if i - window < 0 or i + window >= len(p):
        return None
    nb = np.concatenate([p[i - window : i], p[i + 1 : i + window + 1]])
    s = np.sum(p[i] - nb, axis=0)
    return float(np.linalg.norm(s) / (2 * window * np.linalg.norm(p[i])))


def smoothness_all(xyz: np.ndarray, seg: np.ndarray, window: int = 5) -> np.ndarray:
    """Vectorized smoothness; NaN where the window leaves the segment."""
    n = len(xyz)
    c = np.full(n, np.nan)
    if n < 2 * window + 1:
        return c
    cs = np.vstack([np.zeros(3), np.cumsum(xyz, axis=0)])
    idx = np.arange(window, n - window)
    nb_sum = cs[idx + window + 1] - cs[idx - window] - xyz[idx]
    s = 2 * window * xyz[idx] - nb_sum
    norm_p = np.linalg.norm(xyz[idx], axis=1)
    vals = np.linalg.norm(s, axis=1) / (2 * window * np.where(norm_p > 0, norm_p, np.inf))
    inside = (seg[idx - window] == seg[idx]) & (seg[idx + window] == seg[idx])
    c[idx[inside]] = vals[inside]
    return c


# --- extraction -----------------------------------------------------------


def extract_features(scan: PointCloud, cfg: FeatureConfig = FeatureConfig()) -> FeatureCloud:
    xyz = scan.xyz
    n = len(xyz)
    if n == 0:
        empty = np.zeros(0, int)
        return FeatureCloud(scan.subset(empty), scan.subset(empty), scan.timestamp, empty, empty)

    lines = split_lines(xyz, cfg.line_split_factor)
    seg = segment_ids(xyz, lines, cfg)
    reliable = reliable_mask(scan, cfg, lines)
    c = smoothness_all(xyz, seg, cfg.window)

    picked = np.zeros(n, bool)
    edges, planars = [], []
    w = cfg.window
    starts = np.flatnonzero(np.concatenate([[True], np.diff(lines) != 0]))
    ends = np.concatenate([starts[1:], [n]])
    for s0, s1 in zip(starts, ends):
        bounds = np.linspace(s0, s1, cfg.sectors + 1).round().astype(int)
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b <= a:
                continue
            idx = np.arange(a, b)
            cand = idx[reliable[idx] & ~np.isnan(c[idx])]
            if cand.size == 0:
                continue
            order = cand[np.argsort(-c[cand], kind="stable")]
            count = 0
            for i in order:
                if count >= cfg.max_edges_per_sector or c[i] <= cfg.edge_threshold:
                    break
                if picked[i]:
                    continue
                edges.append(i)
                count += 1
                picked[max(s0, i - w) : min(s1, i + w + 1)] = True
            order = cand[np.argsort(c[cand], kind="stable")]
            count = 0
            for i in order:
                if count >= cfg.max_planars_per_sector or c[i] >= cfg.planar_threshold:
                    break
                if picked[i]:
                    continue
                planars.append(i)
                count += 1
                picked[max(s0, i - w) : min(s1, i + w + 1)] = True

    e_idx = np.array(sorted(edges), dtype=int)
    p_idx = np.array(sorted(planars), dtype=int)
    fc = FeatureCloud(scan.subset(e_idx), scan.subset(p_idx), scan.timestamp, e_idx, p_idx)
    if fc.degenerate:
        log.warning("degenerate scan at %d: %d edges, %d planars", scan.timestamp, len(e_idx), len(p_idx))
    return fc
