"""Trajectory and map metrics: ATE, RPE and inter-frame consistency."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .io import Trajectory, read_colored_ply
from .se3 import PoseSE3, rotation_angle

log = logging.getLogger(__name__)

ASSOCIATION_WINDOW_NS = 10_000_000


@dataclass
class MetricReport:
    ate_rmse: float | None = None
    rpe_trans: list = field(default_factory=list)
    rpe_rot: list = field(default_factory=list)
    consistency: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def associate(gt: Trajectory, est: Trajectory, window_ns: int = ASSOCIATION_WINDOW_NS) -> list[tuple[int, int]]:
    """Greedy nearest-timestamp pairs ``(gt_index, est_index)`` within ``window_ns``."""
    g = np.asarray(gt.timestamps, dtype=np.int64)
    pairs, used = [], set()
    if len(g) == 0:
        return pairs
    for j, ts in enumerate(est.timestamps):
        k = int(np.searchsorted(g, ts))
        best = None
        for c in (k - 1, k):
            if 0 <= c < len(g) and c not in used:
                dt = abs(int(g[c]) - int(ts))
                if dt <= window_ns and (best is None or dt < best[1]):
                    best = (c, dt)
        if best is not None:
            used.add(best[0])
            pairs.append((best[0], j))
    return pairs


def rigid_alignment(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares ``R, t`` with ``dst ~ R @ src + t`` (Umeyama, scale fixed to 1)."""
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    C = (dst - mu_d).T @ (src - mu_s) / len(src)
    U, _, Vt = np.linalg.svd(C)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    return R, mu_d - R @ mu_s


def ate_rmse(gt: Trajectory, est: Trajectory, window_ns: int = ASSOCIATION_WINDOW_NS) -> float:
    pairs = associate(gt, est, window_ns)
    if len(pairs) < 2:
        raise ValueError(f"only {len(pairs)} associated poses; need at least 2")
    P_gt = np.array([gt.poses[i].translation for i, _ in pairs])
    P_est = np.array([est.poses[j].translation for _, j in pairs])
    R, t = rigid_alignment(P_est, P_gt)
    err = P_gt - (P_est @ R.T + t)
    return float(np.sqrt(np.mean(np.sum(err**2, axis=1))))


def rpe(gt: Trajectory, est: Trajectory, delta: int = 1,
        window_ns: int = ASSOCIATION_WINDOW_NS) -> tuple[np.ndarray, np.ndarray]:
    """Relative pose error over ``delta`` associated frames.

    Returns ``(trans_m, rot_deg)`` series.
    """
    pairs = associate(gt, est, window_ns)
    if delta < 1 or delta >= len(pairs):
        raise ValueError(f"delta={delta} invalid for {len(pairs)} associated poses")
    trans, rot = [], []
    for (gi, ei), (gk, ek) in zip(pairs[:-delta], pairs[delta:]):
        rel_gt = gt.poses[gi].inverse() @ gt.poses[gk]
        rel_est = est.poses[ei].inverse() @ est.poses[ek]
        E = rel_gt.inverse() @ rel_est
        trans.append(float(np.linalg.norm(E.translation)))
        rot.append(float(np.degrees(rotation_angle(E.rotation))))
    return np.array(trans), np.array(rot)


def consistency_ratio(frames, thresholds=(1e-4, 5e-4, 1e-3)) -> dict:
    """Fraction of nearest-neighbor distances below each threshold per consecutive pair.

    ``frames`` is a sequence of ``(N, 3)`` arrays in a common frame. Returns
    ``{"pairs": [[ratio per threshold], ...], "average": [...], "thresholds": [...]}``.
    """
    thresholds = [float(t) for t in thresholds]
    clouds = []
    for k, f in enumerate(frames):
        f = np.asarray(f, float).reshape(-1, 3)
        if len(f) == 0:
            log.warning("skipping empty frame %d", k)
            continue
        clouds.append(f)
    if len(clouds) < 2:
        raise ValueError("need at least two non-empty frames")
    per_pair = []
    for prev, cur in zip(clouds[:-1], clouds[1:]):
        d, _ = cKDTree(prev).query(cur, k=1)
        per_pair.append([float(np.mean(d < t)) for t in thresholds])
    avg = np.mean(np.array(per_pair), axis=0).tolist()
    return {"thresholds": thresholds, "pairs": per_pair, "average": avg}


def load_frames(directory) -> list:
    paths = sorted(Path(directory).glob("*.ply"))
    if not paths:
        raise FileNotFoundError(f"no .ply frames in {directory}")
    return [read_colored_ply(p)[0] for p in paths]


def relative_to_first(traj: Trajectory) -> Trajectory:
    """Re-anchor a trajectory so its first pose is the identity."""
    if not len(traj):
        return traj
    inv0 = traj.poses[0].inverse()
    return Trajectory(list(traj.timestamps), [inv0 @ T for T in traj.poses])


__all__ = [
    "MetricReport", "associate", "rigid_alignment", "ate_rmse", "rpe", "consistency_ratio",
    "load_frames", "relative_to_first", "PoseSE3",
]
