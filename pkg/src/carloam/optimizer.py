"""Scan-to-map pose optimization.

Each feature point has a point-to-line or point-to-plane distance ``d``, a
per-term loss ``r`` (the Welsch function of ``d``, or ``d**2`` with Welsch
disabled) and a color weight ``W`` from a Gaussian on the CIEDE2000
difference between the point's color and that of its nearest map neighbor.
The pose minimizes ``sum(W * r)`` by damped Gauss-Newton over left
perturbations.

Two residual vectors are supported. ``"root"`` (default) uses
``f = sign(d) * sqrt(W * r)`` so that ``sum(f**2)`` is the objective and the
Gauss-Newton model is consistent with it. ``"direct"`` stacks
``f = W * psi(|d|)`` itself (``W * |d|`` without Welsch); its Gauss-Newton
step descends ``sum(f**2)`` while acceptance is judged on ``sum(f)``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .color import ciede2000, srgb_to_lab
from .features import FeatureCloud
from .global_map import GlobalMap, Matches
from .kernels import GaussianParam, WelschParam, gaussian_weight, welsch, welsch_derivative
from .se3 import PoseSE3, exp_se3

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    nu: float = 0.2
    sigma: float = 5.0
    max_iterations: int = 20
    step_tolerance: float = 1e-6
    damping: float = 1e-4
    max_correspondence_dist: float = 1.0
    welsch_enabled: bool = True
    color_weight_enabled: bool = True
    min_terms: int = 10
    max_condition: float = 1e12
    max_retries: int = 5
    workers: int = 1
    residual_form: str = "root"  # or "direct"

    def __post_init__(self):
        if self.residual_form not in ("root", "direct"):
            raise ValueError(f"unknown residual_form {self.residual_form!r}")
        WelschParam(self.nu)
        GaussianParam(self.sigma)
        if self.step_tolerance <= 0 or self.damping < 0 or self.max_correspondence_dist <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class ResidualTerm:
    kind: str
    distance: float  # signed for planes
    residual: float  # weighted entry of the stacked residual vector
    weight: float
    jacobian: np.ndarray  # (6,) row d(residual)/d(xi), ordering (v, w)


@dataclass
class AlignmentResult:
    pose: PoseSE3
    iterations: int
    final_cost: float
    inlier_stats: dict = field(default_factory=dict)
    converged: bool = False
    degenerate: bool = False
    insufficient: bool = False
    stalled: bool = False
    costs: list = field(default_factory=list)  # (cost before, cost after) per accepted step
    steps: list = field(default_factory=list)  # norm of each accepted step

    @property
    def low_confidence(self) -> bool:
        return self.degenerate or self.insufficient


# --- scalar API -----------------------------------------------------------


def point_to_edge_distance(q, corr) -> float:
    a = np.asarray(corr.anchor.position, float)
    return float(np.linalg.norm(np.cross(np.asarray(q, float) - a, corr.direction)))


def point_to_plane_distance(q, corr) -> float:
    a = np.asarray(corr.anchor.position, float)
    return float((np.asarray(q, float) - a) @ corr.normal)


def color_weight(query_color, anchor_color, cfg: OptimizerConfig = OptimizerConfig()) -> float:
    if not cfg.color_weight_enabled or query_color is None or anchor_color is None:
        return 1.0
    de = ciede2000(srgb_to_lab(query_color), srgb_to_lab(anchor_color))
    return float(gaussian_weight(de, cfg.sigma))


def build_residual(kind: str, feature_point, T: PoseSE3, corr, cfg: OptimizerConfig = OptimizerConfig(),
                   color=None) -> ResidualTerm | None:
    """Residual term for one LiDAR-frame feature point against a validated correspondence."""
    q = T.apply(np.asarray(feature_point, float))
    if kind == "edge":
        axis = corr.direction
    elif kind in ("plane", "planar"):
        axis = corr.normal
    else:
        raise ValueError(f"unknown term kind {kind!r}")
    w = color_weight(color, corr.anchor.color, cfg)
    d, f, row, ok = _terms(kind, q[None], np.asarray(corr.anchor.position, float)[None], axis[None],
                           np.array([w]), cfg)
    if not ok[0]:
        return None
    return ResidualTerm(kind, float(d[0]), float(f[0]), w, row[0])


# --- batched core ---------------------------------------------------------


def _terms(kind, q, anchor, axis, weight, cfg: OptimizerConfig):
    """Distances, residual entries, Jacobian rows and validity for a batch."""
    diff = q - anchor
    if kind == "edge":
        cr = np.cross(diff, axis)
        dist = np.linalg.norm(cr, axis=1)
        ok = (dist > 0) & (dist <= cfg.max_correspondence_dist)
        pn = cr / np.where(dist > 0, dist, 1.0)[:, None]
        grad = np.cross(axis, pn)  # d|d|/dq
    else:
        dist = np.einsum("ij,ij->i", diff, axis)
        ok = np.abs(dist) <= cfg.max_correspondence_dist
        grad = axis  # d(d)/dq, signed distance
    if cfg.residual_form == "direct":
        absd = np.abs(dist)
        if kind != "edge":
            grad = np.where(dist < 0, -1.0, 1.0)[:, None] * grad
        if cfg.welsch_enabled:
            r, dr = welsch(absd, cfg.nu), welsch_derivative(absd, cfg.nu)
        else:
            r, dr = absd, np.ones_like(absd)
        f, scale = weight * r, weight * dr
    else:
        # the edge distance is nonnegative, so sign(d) only acts on planes
        sw = np.sqrt(weight)
        if cfg.welsch_enabled:
            g, dg = _welsch_root(dist, cfg.nu)
        else:
            g, dg = dist, np.ones_like(dist)
        f, scale = sw * g, sw * dg
    rows = np.empty((len(q), 6))
    rows[:, :3] = scale[:, None] * grad
    rows[:, 3:] = scale[:, None] * np.cross(q, grad)
    return dist, f, rows, ok


def _welsch_root(d, nu):
    """``sign(d) * sqrt(psi(|d|))`` and its derivative in ``d``."""
    x = 0.5 * (d / nu) ** 2
    root = np.sqrt(-np.expm1(-x))
    g = np.copysign(root, d)
    small = root < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        dg = np.abs(d) * np.exp(-x) / (2 * nu * nu * np.where(small, 1.0, root))
    # limit at d -> 0 (series of sqrt(1 - exp(-x)) is |d| / (sqrt(2) nu))
    dg = np.where(small, 1.0 / (np.sqrt(2.0) * nu), dg)
    return g, dg


def objective(f: np.ndarray, cfg: OptimizerConfig) -> float:
    """The minimized cost ``sum(W * r)`` recovered from stacked residuals."""
    return float(np.sum(f)) if cfg.residual_form == "direct" else float(np.sum(f * f))


def _weights(query_lab, query_has, m: Matches, cfg: OptimizerConfig) -> np.ndarray:
    w = np.ones(len(query_has))
    if not cfg.color_weight_enabled:
        return w
    both = query_has & m.anchor_has_color & m.valid
    if both.any():
        de = ciede2000(query_lab[both], srgb_to_lab(m.anchor_rgb[both]))
        w[both] = gaussian_weight(de, cfg.sigma)
    return w


@dataclass
class _Block:
    kind: str
    points: np.ndarray  # LiDAR frame
    lab: np.ndarray
    has_color: np.ndarray


@dataclass
class _Linearization:
    kind: str
    points: np.ndarray
    anchor: np.ndarray
    axis: np.ndarray
    weight: np.ndarray
    f: np.ndarray
    rows: np.ndarray
    stats: dict


def _linearize(block: _Block, gmap: GlobalMap, T: PoseSE3, cfg: OptimizerConfig) -> _Linearization:
    q = T.apply(block.points)
    m = gmap.match(block.kind, q)
    w = _weights(block.lab, block.has_color, m, cfg)
    _, f, rows, ok = _terms(block.kind, q, m.anchor, m.axis, w, cfg)
    ok &= m.valid
    stats = m.counts()
    stats["gated_residual"] = int(np.sum(m.valid & ~ok))
    return _Linearization(block.kind, block.points[ok], m.anchor[ok], m.axis[ok], w[ok], f[ok], rows[ok], stats)


def _chunks(block: _Block, n: int) -> list:
    if n <= 1 or len(block.points) < 2 * n:
        return [block]
    bounds = np.linspace(0, len(block.points), n + 1).astype(int)
    return [
        _Block(block.kind, block.points[a:b], block.lab[a:b], block.has_color[a:b])
        for a, b in zip(bounds[:-1], bounds[1:])
    ]


def _cost_at(lins, T: PoseSE3, cfg: OptimizerConfig) -> float:
    total = 0.0
    for lin in lins:
        if len(lin.points):
            _, f, _, _ = _terms(lin.kind, T.apply(lin.points), lin.anchor, lin.axis, lin.weight, cfg)
            total += objective(f, cfg)
    return total


def _merge_stats(lins) -> dict:
    out = {}
    for lin in lins:
        bucket = out.setdefault(lin.kind, {})
        for k, v in lin.stats.items():
            bucket[k] = bucket.get(k, 0) + v
    return out


def _blocks(features: FeatureCloud) -> list:
    blocks = []
    for kind, cloud in (("edge", features.edges), ("plane", features.planars)):
        lab = np.zeros((len(cloud), 3))
        if cloud.has_color.any():
            lab[cloud.has_color] = srgb_to_lab(cloud.rgb[cloud.has_color])
        blocks.append(_Block(kind, cloud.xyz, lab, cloud.has_color))
    return blocks


def align(features: FeatureCloud, gmap: GlobalMap, initial: PoseSE3,
          cfg: OptimizerConfig = OptimizerConfig()) -> AlignmentResult:
    """Estimate the LiDAR-to-world pose of ``features`` against ``gmap``."""
    blocks = _blocks(features)
    parts = [c for b in blocks for c in _chunks(b, cfg.workers)]
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    T = initial
    result = AlignmentResult(initial, 0, 0.0)
    try:
        for it in range(cfg.max_iterations):
            if pool is not None:
                lins = list(pool.map(lambda b: _linearize(b, gmap, T, cfg), parts))
            else:
                lins = [_linearize(b, gmap, T, cfg) for b in parts]
            result.inlier_stats = _merge_stats(lins)
            n_terms = sum(len(lin.f) for lin in lins)
            result.inlier_stats["terms"] = n_terms
            if n_terms < cfg.min_terms:
                result.pose = initial
                result.insufficient = True
                result.final_cost = 0.0
                result.iterations = it
                return result
            J = np.concatenate([lin.rows for lin in lins])
            f = np.concatenate([lin.f for lin in lins])
            H = J.T @ J
            g = J.T @ f
            cost = objective(f, cfg)
            result.final_cost = cost
            result.iterations = it + 1

            # judged before damping, which would otherwise mask a rank-deficient H
            if np.linalg.cond(H) > cfg.max_condition:
                result.degenerate = True
                result.pose = T
                return result
            # damping is relative to the mean curvature so the x10 retry ladder
            # reaches gradient-descent-sized steps whatever the number of terms
            lam = cfg.damping * max(np.trace(H) / 6.0, 1e-12)
            accepted = None
            for _ in range(cfg.max_retries + 1):
                A = H + lam * np.eye(6)
                delta = -np.linalg.solve(A, g)
                T_new = exp_se3(delta) @ T
                new_cost = _cost_at(lins, T_new, cfg)
                if new_cost <= cost + 1e-9 * abs(cost):
                    accepted = (delta, T_new, new_cost)
                    break
                lam *= 10.0
            if accepted is None:
                result.stalled = True
                break
            delta, T, new_cost = accepted
            result.costs.append((cost, new_cost))
            result.steps.append(float(np.linalg.norm(delta)))
            result.final_cost = new_cost
            if np.linalg.norm(delta) < cfg.step_tolerance:
                result.converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()
    result.pose = T
    return result
