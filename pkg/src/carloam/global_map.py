"""Incremental world-frame feature map with kNN queries and local geometry checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .features import FeatureCloud

# rejection causes reported in inlier statistics
OK, TOO_FEW, TOO_FAR, NOT_LINE, NOT_PLANE = 0, 1, 2, 3, 4
REJECT_NAMES = {TOO_FEW: "too_few_neighbors", TOO_FAR: "too_far", NOT_LINE: "not_line", NOT_PLANE: "not_plane"}


@dataclass(frozen=True)
class MapConfig:
    neighbors: int = 5
    edge_voxel: float = 0.1
    planar_voxel: float = 0.2
    edge_ratio: float = 3.0
    plane_ratio: float = 0.1
    plane_fit_tol: float = 0.1
    max_correspondence_dist: float = 1.0
    edge_direction: str = "pca"  # or "two_point": farthest minus nearest neighbor
    keep_visual_cloud: bool = True
    visual_voxel: float = 0.05


@dataclass(frozen=True)
class MapPoint:
    position: np.ndarray
    color: tuple | None = None


@dataclass(frozen=True)
class EdgeCorrespondence:
    query: np.ndarray
    neighbors: list
    direction: np.ndarray
    anchor: MapPoint


@dataclass(frozen=True)
class PlaneCorrespondence:
    query: np.ndarray
    neighbors: list
    normal: np.ndarray
    anchor: MapPoint


@dataclass
class Matches:
    """Batched correspondences for one feature kind.

    ``axis`` is the unit line direction for edges and the unit normal for
    planes. Rows with ``status != OK`` are invalid and must be ignored.
    """

    status: np.ndarray
    anchor: np.ndarray
    axis: np.ndarray
    anchor_rgb: np.ndarray
    anchor_has_color: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.status == OK

    def counts(self) -> dict:
        out = {"accepted": int(np.sum(self.status == OK))}
        for code, name in REJECT_NAMES.items():
            out[name] = int(np.sum(self.status == code))
        return out


def _positive_first(v: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Flip rows so that the first component with magnitude > eps is positive."""
    v = np.array(v, dtype=float)
    nz = np.abs(v) > eps
    first = np.argmax(nz, axis=-1)
    lead = np.take_along_axis(v, first[..., None], axis=-1)[..., 0]
    sign = np.where(lead < 0, -1.0, 1.0)
    return v * sign[..., None]


def covariance_eigen(neighbors: np.ndarray):
    """Eigen-decomposition of neighbor covariances, largest eigenvalue first.

    ``neighbors`` is ``(M, n, 3)``. Returns ``(centroid, evals, evecs)`` with
    ``evals`` shaped ``(M, 3)`` descending and ``evecs[..., :, k]`` the unit
    eigenvector of ``evals[..., k]``.
    """
    nb = np.asarray(neighbors, dtype=float)
    centroid = nb.mean(axis=-2)
    d = nb - centroid[..., None, :]
    cov = np.einsum("...ki,...kj->...ij", d, d) / nb.shape[-2]
    w, v = np.linalg.eigh(cov)
    return centroid, w[..., ::-1], v[..., :, ::-1]


def fit_edges(neighbors: np.ndarray, cfg: MapConfig = MapConfig()):
    """Line test on ``(M, n, 3)`` neighbor sets sorted by distance.

    Returns ``(accepted, direction)``.
    """
    _, ev, vec = covariance_eigen(neighbors)
    accepted = (ev[..., 0] > 0) & (ev[..., 0] >= cfg.edge_ratio * ev[..., 1])
    if cfg.edge_direction == "two_point":
        direction = neighbors[..., -1, :] - neighbors[..., 0, :]
        norm = np.linalg.norm(direction, axis=-1, keepdims=True)
        accepted &= norm[..., 0] > 0
        direction = direction / np.where(norm > 0, norm, 1.0)
    elif cfg.edge_direction == "pca":
        direction = vec[..., :, 0]
    else:
        raise ValueError(f"unknown edge_direction {cfg.edge_direction!r}")
    return accepted, _positive_first(direction)


def fit_planes(neighbors: np.ndarray, cfg: MapConfig = MapConfig()):
    """Plane test on ``(M, n, 3)`` neighbor sets. Returns ``(accepted, normal)``."""
    centroid, ev, vec = covariance_eigen(neighbors)
    normal = _positive_first(vec[..., :, 2])
    # the spread guard rejects (numerically) collinear sets whose normal is arbitrary
    spread = ev[..., 1] > 1e-8 * ev[..., 0]
    flat = ev[..., 2] <= cfg.plane_ratio * ev[..., 1]
    resid = np.abs(np.einsum("...kj,...j->...k", neighbors - centroid[..., None, :], normal))
    fits = np.all(resid < cfg.plane_fit_tol, axis=-1)
    return spread & flat & fits, normal


def validate_edge(q, neighbors, cfg: MapConfig = MapConfig()) -> EdgeCorrespondence | None:
    pos = np.array([np.asarray(m.position, float) for m in neighbors])
    ok, direction = fit_edges(pos[None], cfg)
    if not ok[0]:
        return None
    return EdgeCorrespondence(np.asarray(q, float), list(neighbors), direction[0], neighbors[0])


def validate_plane(q, neighbors, cfg: MapConfig = MapConfig()) -> PlaneCorrespondence | None:
    pos = np.array([np.asarray(m.position, float) for m in neighbors])
    ok, normal = fit_planes(pos[None], cfg)
    if not ok[0]:
        return None
    return PlaneCorrespondence(np.asarray(q, float), list(neighbors), normal[0], neighbors[0])


def voxel_downsample(xyz: np.ndarray, voxel: float) -> np.ndarray:
    """Indices of one representative per voxel: the member nearest the voxel's
    geometric center (lowest index on ties), in voxel-key order."""
    xyz = np.asarray(xyz, dtype=float)
    if len(xyz) == 0:
        return np.zeros(0, int)
    keys = np.floor(xyz / voxel).astype(np.int64)
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    d2 = np.sum((xyz - (keys + 0.5) * voxel) ** 2, axis=1)
    order = np.lexsort((np.arange(len(xyz)), d2, inv))
    first = np.concatenate([[True], inv[order][1:] != inv[order][:-1]])
    return order[first]


class FeatureStore:
    """One feature kind (edge or planar) of the map."""

    def __init__(self, voxel: float):
        self.voxel = voxel
        self.xyz = np.zeros((0, 3))
        self.rgb = np.zeros((0, 3), np.uint8)
        self.has_color = np.zeros(0, bool)
        self._tree = None

    def __len__(self) -> int:
        return len(self.xyz)

    def insert(self, xyz, rgb=None, has_color=None) -> None:
        xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
        rgb = np.zeros((len(xyz), 3), np.uint8) if rgb is None else np.asarray(rgb, np.uint8)
        has_color = np.zeros(len(xyz), bool) if has_color is None else np.asarray(has_color, bool)
        fin = np.isfinite(xyz).all(axis=1)
        xyz, rgb, has_color = xyz[fin], rgb[fin], has_color[fin]
        all_xyz = np.concatenate([self.xyz, xyz])
        keep = np.sort(voxel_downsample(all_xyz, self.voxel))  # store order = insertion order
        self.xyz = all_xyz[keep]
        self.rgb = np.concatenate([self.rgb, rgb])[keep]
        self.has_color = np.concatenate([self.has_color, has_color])[keep]
        self._tree = cKDTree(self.xyz) if len(self.xyz) else None

    def knn(self, q, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Exact k nearest neighbors, ascending distance, ties by lower index.

        ``q`` is ``(M, 3)``; returns ``(dist, idx)`` each ``(M, k)``.
        """
        q = np.atleast_2d(np.asarray(q, dtype=float))
        if not np.isfinite(q).all():
            raise ValueError("non-finite query point")
        n = len(self.xyz)
        if n < k:
            raise ValueError(f"map holds {n} points, {k} neighbors requested")
        m = min(n, k + 4)
        _, cand = self._tree.query(q, k=m)
        cand = np.asarray(cand).reshape(len(q), m)
        # the tree reports index n when distances overflow (queries near 1e154 and beyond)
        lost = (cand >= n).any(axis=1)
        cand[lost] = np.arange(m)
        with np.errstate(over="ignore"):
            d = np.sqrt(np.sum((self.xyz[cand] - q[:, None, :]) ** 2, axis=-1))
        order = np.lexsort((cand, d), axis=-1)
        cand = np.take_along_axis(cand, order, axis=-1)
        d = np.take_along_axis(d, order, axis=-1)
        # a tie reaching the last candidate may hide equal-distance points with lower index
        unsure = np.flatnonzero((d[:, k - 1] >= d[:, m - 1]) & ~lost) if m < n else np.zeros(0, int)
        for row in unsure:
            r = d[row, k - 1]
            ball = np.asarray(self._tree.query_ball_point(q[row], r * (1 + 1e-9) + 1e-300), dtype=int)
            bd = np.sqrt(np.sum((self.xyz[ball] - q[row]) ** 2, axis=-1))
            o = np.lexsort((ball, bd))[:k]
            cand[row, :k] = ball[o]
            d[row, :k] = bd[o]
        d[lost] = np.inf
        return d[:, :k], cand[:, :k]

    def points(self, idx) -> list:
        return [
            MapPoint(self.xyz[i].copy(), tuple(int(c) for c in self.rgb[i]) if self.has_color[i] else None)
            for i in np.atleast_1d(idx)
        ]


class GlobalMap:
    def __init__(self, cfg: MapConfig = MapConfig()):
        self.cfg = cfg
        self.edges = FeatureStore(cfg.edge_voxel)
        self.planars = FeatureStore(cfg.planar_voxel)
        self.visual = FeatureStore(cfg.visual_voxel)

    def store(self, kind: str) -> FeatureStore:
        if kind == "edge":
            return self.edges
        if kind in ("plane", "planar"):
            return self.planars
        raise ValueError(f"unknown map part {kind!r}")

    def knn(self, kind: str, q, n: int | None = None) -> list:
        """Nearest map points to a single query, as :class:`MapPoint` list."""
        _, idx = self.store(kind).knn(np.asarray(q, float).reshape(1, 3), n or self.cfg.neighbors)
        return self.store(kind).points(idx[0])

    def insert(self, features: FeatureCloud) -> None:
        """Add world-frame features."""
        e, p = features.edges, features.planars
        if len(e):
            self.edges.insert(e.xyz, e.rgb, e.has_color)
        if len(p):
            self.planars.insert(p.xyz, p.rgb, p.has_color)

    def insert_visual(self, cloud: PointCloud) -> None:
        if self.cfg.keep_visual_cloud and len(cloud):
            self.visual.insert(cloud.xyz, cloud.rgb, cloud.has_color)

    def match(self, kind: str, q: np.ndarray) -> Matches:
        """Correspondences for world-frame query points ``(M, 3)``."""
        store = self.store(kind)
        q = np.atleast_2d(np.asarray(q, dtype=float))
        m, k = len(q), self.cfg.neighbors
        status = np.full(m, TOO_FEW, dtype=np.int8)
        anchor = np.zeros((m, 3))
        axis = np.zeros((m, 3))
        rgb = np.zeros((m, 3), np.uint8)
        has = np.zeros(m, bool)
        if len(store) < k or m == 0:
            return Matches(status, anchor, axis, rgb, has)
        fin = np.flatnonzero(np.isfinite(q).all(axis=1))
        status[:] = TOO_FAR  # non-finite queries have no neighbors at any distance
        if fin.size == 0:
            return Matches(status, anchor, axis, rgb, has)
        d, idx = store.knn(q[fin], k)
        nb = store.xyz[idx]
        anchor[fin] = nb[:, 0]
        rgb[fin] = store.rgb[idx[:, 0]]
        has[fin] = store.has_color[idx[:, 0]]
        if kind == "edge":
            ok, axis[fin] = fit_edges(nb, self.cfg)
            status[fin] = np.where(ok, OK, NOT_LINE)
        else:
            ok, axis[fin] = fit_planes(nb, self.cfg)
            status[fin] = np.where(ok, OK, NOT_PLANE)
        status[fin[d[:, 0] > self.cfg.max_correspondence_dist]] = TOO_FAR
        return Matches(status, anchor, axis, rgb, has)
