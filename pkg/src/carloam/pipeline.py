"""Batch odometry driver: manifest in, trajectory / map / report out."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .camera import CameraModel, Image, load_calibration, load_image, sample_colors
from .cloud import PointCloud
from .features import FeatureConfig, extract_features
from .global_map import GlobalMap, MapConfig
from .io import ManifestEntry, Trajectory
from .optimizer import AlignmentResult, OptimizerConfig, align
from .se3 import PoseSE3

log = logging.getLogger(__name__)


class InputError(Exception):
    """Unreadable or malformed run inputs."""


@dataclass(frozen=True)
class PipelineConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    map: MapConfig = field(default_factory=MapConfig)
    coloring: bool = True
    max_pairing_gap_ns: int = 100_000_000
    save_frames: bool = False
    map_file: str = "map.ply"
    trajectory_file: str = "trajectory.txt"
    report_file: str = "run_report.json"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d or {})
        subs = {"features": FeatureConfig, "optimizer": OptimizerConfig, "map": MapConfig}
        kw = {}
        for key, value in d.items():
            if key in subs:
                kw[key] = _build(subs[key], value, key)
            elif key in {f.name for f in fields(cls)}:
                kw[key] = value
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**kw)


def _build(kind, values: dict, where: str):
    if not isinstance(values, dict):
        raise ValueError(f"{where} must be an object")
    names = {f.name for f in fields(kind)}
    unknown = set(values) - names
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}")
    return kind(**values)


def load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path, encoding="utf-8") as f:
        return PipelineConfig.from_dict(json.load(f))


def pair_image(scan_ts: int, images: list, max_gap_ns: int = 100_000_000):
    """Closest-timestamp image entry, or ``None`` beyond ``max_gap_ns``; ties go to the earlier image."""
    best = None
    for e in images:
        dt = abs(int(e.timestamp) - int(scan_ts))
        if best is None or dt < best[0] or (dt == best[0] and e.timestamp < best[1].timestamp):
            best = (dt, e)
    if best is None or best[0] > max_gap_ns:
        return None
    return best[1]


@dataclass
class ScanRecord:
    timestamp: int
    pose: PoseSE3
    iterations: int = 0
    final_cost: float = 0.0
    edges: int = 0
    planars: int = 0
    colored_features: int = 0
    image: str | None = None
    low_confidence: bool = False
    stalled: bool = False
    note: str = ""
    inlier_stats: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pose"] = self.pose.matrix().tolist()
        return d


class OdometryState:
    """Map plus the pose history needed for the motion prior."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.map = GlobalMap(cfg.map)
        self.poses: list[PoseSE3] = []
        self.records: list[ScanRecord] = []

    def initial_guess(self) -> PoseSE3:
        if len(self.poses) < 2:
            return PoseSE3.identity()
        prev2, prev = self.poses[-2], self.poses[-1]
        return prev @ (prev2.inverse() @ prev)


def process_scan(scan: PointCloud, image: Image | None, camera: CameraModel | None,
                 state: OdometryState) -> ScanRecord:
    """Colorize, extract, align and insert one scan; returns its record."""
    cfg = state.cfg
    t0 = time.perf_counter()
    if image is not None and camera is not None and cfg.coloring:
        rgb, has = sample_colors(camera, image, scan.xyz)
        scan = scan.with_colors(rgb, has)
    feats = extract_features(scan, cfg.features)
    rec = ScanRecord(scan.timestamp, PoseSE3.identity(), edges=len(feats.edges), planars=len(feats.planars))
    rec.colored_features = int(feats.edges.has_color.sum() + feats.planars.has_color.sum())
    if image is not None and cfg.coloring and rec.colored_features == 0:
        rec.note = "no colored features; neutral weights"

    if not state.poses:
        pose = PoseSE3.identity()
    else:
        guess = state.initial_guess()
        res: AlignmentResult = align(feats, state.map, guess, cfg.optimizer)
        rec.iterations, rec.final_cost = res.iterations, res.final_cost
        rec.inlier_stats, rec.stalled = res.inlier_stats, res.stalled
        diverged = not np.isfinite(res.pose.matrix()).all()
        if res.low_confidence or diverged:
            pose = guess
            rec.low_confidence = True
            why = "degenerate" if res.degenerate else "diverged" if diverged else "insufficient correspondences"
            rec.note = "low-confidence: " + why
        else:
            pose = res.pose
    state.map.insert(feats.transformed(pose))
    if state.map.cfg.keep_visual_cloud and scan.has_color.any():
        state.map.insert_visual(scan.subset(np.flatnonzero(scan.has_color)).transformed(pose))
    rec.pose = pose
    rec.seconds = time.perf_counter() - t0
    state.poses.append(pose)
    state.records.append(rec)
    return rec


@dataclass
class RunResult:
    trajectory: Trajectory
    records: list
    out: Path

    @property
    def degenerate(self) -> bool:
        return any(r.low_confidence for r in self.records)


def _read_image(entry: ManifestEntry) -> Image:
    try:
        return load_image(entry.path, entry.timestamp)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image entry {entry.path}: {exc}") from exc


def run(manifest, calib, cfg: PipelineConfig = PipelineConfig(), out=".") -> RunResult:
    """Process every lidar entry of ``manifest`` in timestamp order and write outputs under ``out``."""
    out = Path(out)
    try:
        entries = io.read_manifest(manifest) if not isinstance(manifest, list) else manifest
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read manifest {manifest}: {exc}") from exc
    scans = sorted((e for e in entries if e.kind == "lidar"), key=lambda e: e.timestamp)
    images = [e for e in entries if e.kind == "image"]
    if not scans:
        raise InputError("no lidar entries")
    camera = None
    if cfg.coloring and images:
        try:
            camera = load_calibration(calib)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read calibration {calib}: {exc}") from exc

    state = OdometryState(cfg)
    frames = []
    for entry in scans:
        if not Path(entry.path).exists():
            raise InputError(f"missing scan file {entry.path}")
        try:
            scan = io.read_scan(entry.path, entry.timestamp)
        except (ValueError, OSError) as exc:
            log.warning("skipping scan %s: %s", entry.path, exc)
            continue
        img_entry = pair_image(entry.timestamp, images, cfg.max_pairing_gap_ns) if camera else None
        img = _read_image(img_entry) if img_entry is not None else None
        rec = process_scan(scan, img, camera, state)
        rec.image = str(img_entry.path) if img_entry is not None else None
        if cfg.save_frames:
            frames.append((rec.timestamp, scan.transformed(rec.pose)))
        log.info("scan %d: %d iterations, %d edges, %d planars", entry.timestamp, rec.iterations, rec.edges,
                 rec.planars)

    if not state.records:
        raise InputError("no readable lidar scans")
    traj = Trajectory([r.timestamp for r in state.records], [r.pose for r in state.records],
                      {r.timestamp: r.note for r in state.records if r.low_confidence})
    out.mkdir(parents=True, exist_ok=True)
    io.write_tum(out / cfg.trajectory_file, traj)
    m = state.map
    xyz = np.concatenate([m.edges.xyz, m.planars.xyz])
    rgb = np.concatenate([m.edges.rgb, m.planars.rgb])
    io.write_colored_ply(out / cfg.map_file, xyz, rgb)
    if cfg.save_frames:
        (out / "frames").mkdir(exist_ok=True)
        for k, (_, frame) in enumerate(frames):
            io.write_colored_ply(out / "frames" / f"{k:06d}.ply", frame.xyz, frame.rgb)
    report = {
        "config": cfg.to_dict(),
        "scans": [r.to_dict() for r in state.records],
        "low_confidence": sum(r.low_confidence for r in state.records),
        "total_seconds": sum(r.seconds for r in state.records),
    }
    io.atomic_write_bytes(out / cfg.report_file, json.dumps(report, indent=1, default=_jsonable).encode())
    return RunResult(traj, state.records, out)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


def run_dataset(ds, cfg: PipelineConfig = PipelineConfig()) -> Trajectory:
    """In-memory run over a generated dataset (no files); returns the trajectory."""
    state = OdometryState(cfg)
    stamps = [img.timestamp for img in ds.images]
    for scan in ds.scans:
        img = None
        if cfg.coloring and ds.images:
            ent = pair_image(scan.timestamp, [ManifestEntry("image", t, k) for k, t in enumerate(stamps)],
                             cfg.max_pairing_gap_ns)
            img = ds.images[ent.path] if ent is not None else None
        process_scan(scan, img, ds.camera, state)
    return Trajectory([r.timestamp for r in state.records], [r.pose for r in state.records],
                      {r.timestamp: r.note for r in state.records if r.low_confidence})


def with_overrides(cfg: PipelineConfig, **sections) -> PipelineConfig:
    """Copy of ``cfg`` with sub-config fields replaced, e.g. ``optimizer={"welsch_enabled": False}``."""
    kw = {}
    for name, values in sections.items():
        cur = getattr(cfg, name)
        kw[name] = replace(cur, **values) if isinstance(values, dict) else values
    return replace(cfg, **kw)
