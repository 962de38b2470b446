"""File formats: PLY point clouds, text scans, TUM trajectories, manifests."""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .se3 import PoseSE3, from_quaternion, to_quaternion

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


class FormatError(ValueError):
    pass


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def ply_bytes(fields: dict) -> bytes:
    """Binary little-endian PLY from an ordered ``{name: array}`` mapping."""
    names = list(fields)
    n = len(next(iter(fields.values()))) if fields else 0
    inv = {"i1": "char", "u1": "uchar", "i2": "short", "u2": "ushort", "i4": "int",
           "u4": "uint", "f4": "float", "f8": "double"}
    dtype = np.dtype([(k, "<" + np.asarray(fields[k]).dtype.str[1:]) for k in names])
    rec = np.empty(n, dtype=dtype)
    for k in names:
        rec[k] = fields[k]
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    for k in names:
        header.append(f"property {inv[dtype[k].str[1:]]} {k}")
    header.append("end_header")
    return ("\n".join(header) + "\n").encode("ascii") + rec.tobytes()


def read_ply(path) -> dict:
    with open(path, "rb") as f:
        raw = f.read()
    end = raw.find(b"end_header")
    if not raw.startswith(b"ply") or end < 0:
        raise FormatError(f"{path}: not a PLY file")
    body_start = raw.index(b"\n", end) + 1
    header = raw[:body_start].decode("ascii").splitlines()
    fmt, count, props, in_vertex = None, 0, [], False
    for line in header:
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                count = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list":
                raise FormatError(f"{path}: list properties unsupported in vertex element")
            if tok[1] not in _PLY_TYPES:
                raise FormatError(f"{path}: unknown property type {tok[1]}")
            props.append((tok[2], _PLY_TYPES[tok[1]]))
    if fmt == "binary_little_endian":
        dtype = np.dtype([(name, "<" + t) for name, t in props])
        need = count * dtype.itemsize
        if len(raw) - body_start < need:
            raise FormatError(f"{path}: truncated PLY body")
        rec = np.frombuffer(raw, dtype=dtype, count=count, offset=body_start)
        return {name: np.array(rec[name]) for name, _ in props}
    if fmt == "ascii":
        rows = raw[body_start:].decode("ascii").split()
        arr = np.array(rows[: count * len(props)], dtype=float).reshape(count, len(props))
        return {name: arr[:, i].astype(t) for i, (name, t) in enumerate(props)}
    raise FormatError(f"{path}: unsupported PLY format {fmt}")


def write_scan_ply(path, cloud: PointCloud) -> None:
    fields = {
        "x": cloud.xyz[:, 0].astype(np.float32),
        "y": cloud.xyz[:, 1].astype(np.float32),
        "z": cloud.xyz[:, 2].astype(np.float32),
        "intensity": cloud.intensity.astype(np.float32),
    }
    if cloud.time is not None:
        fields["time"] = cloud.time.astype(np.float64)
    atomic_write_bytes(path, ply_bytes(fields))


def write_colored_ply(path, xyz, rgb) -> None:
    xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
    rgb = np.asarray(rgb, dtype=np.uint8).reshape(-1, 3)
    fields = {
        "x": xyz[:, 0].astype(np.float32),
        "y": xyz[:, 1].astype(np.float32),
        "z": xyz[:, 2].astype(np.float32),
        "red": rgb[:, 0],
        "green": rgb[:, 1],
        "blue": rgb[:, 2],
    }
    atomic_write_bytes(path, ply_bytes(fields))


def read_scan(path, timestamp: int = 0) -> PointCloud:
    """Load a scan from PLY (x, y, z, intensity[, time]) or text ``x y z intensity``."""
    path = Path(path)
    if path.suffix.lower() == ".ply":
        d = read_ply(path)
        missing = [k for k in ("x", "y", "z") if k not in d]
        if missing:
            raise FormatError(f"{path}: missing fields {missing}")
        xyz = np.stack([d["x"], d["y"], d["z"]], axis=1).astype(float)
        intensity = d.get("intensity")
        t = d.get("time", d.get("timestamp"))
        rgb = has = None
        if all(k in d for k in ("red", "green", "blue")):
            rgb = np.stack([d["red"], d["green"], d["blue"]], axis=1)
            has = np.ones(len(xyz), bool)
    else:
        try:
            arr = np.loadtxt(path, dtype=float, ndmin=2)
        except ValueError as e:
            raise FormatError(f"{path}: {e}") from e
        if arr.size == 0:
            arr = np.zeros((0, 4))
        if arr.shape[1] < 3:
            raise FormatError(f"{path}: expected at least 3 columns")
        xyz = arr[:, :3]
        intensity = arr[:, 3] if arr.shape[1] > 3 else None
        t = rgb = has = None
    if not np.all(np.isfinite(xyz)):
        raise FormatError(f"{path}: non-finite coordinates")
    return PointCloud(xyz, intensity, rgb, has, t, timestamp)


def read_colored_ply(path) -> tuple[np.ndarray, np.ndarray]:
    d = read_ply(path)
    xyz = np.stack([d["x"], d["y"], d["z"]], axis=1).astype(float)
    if all(k in d for k in ("red", "green", "blue")):
        rgb = np.stack([d["red"], d["green"], d["blue"]], axis=1).astype(np.uint8)
    else:
        rgb = np.zeros((len(xyz), 3), np.uint8)
    return xyz, rgb


# --- trajectories ---------------------------------------------------------


@dataclass
class Trajectory:
    """Stamped poses; timestamps in integer nanoseconds."""

    timestamps: list
    poses: list
    comments: dict = None  # timestamp -> note

    def __post_init__(self):
        if len(self.timestamps) != len(self.poses):
            raise ValueError("timestamps and poses differ in length")
        if self.comments is None:
            self.comments = {}

    def __len__(self) -> int:
        return len(self.poses)

    def positions(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses]).reshape(-1, 3)

    def seconds(self) -> np.ndarray:
        return np.asarray(self.timestamps, dtype=np.int64) / 1e9


def format_tum(traj: Trajectory) -> str:
    lines = []
    for ts, T in zip(traj.timestamps, traj.poses):
        note = traj.comments.get(ts)
        if note:
            lines.append(f"# {note}")
        q = to_quaternion(T.rotation)
        t = T.translation
        sec = f"{ts // 1_000_000_000}.{ts % 1_000_000_000:09d}"
        lines.append(
            f"{sec} {t[0]:.9f} {t[1]:.9f} {t[2]:.9f} {q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f}"
        )
    return "\n".join(lines) + "\n"


def write_tum(path, traj: Trajectory) -> None:
    atomic_write_bytes(path, format_tum(traj).encode("utf-8"))


def read_tum(path) -> Trajectory:
    stamps, poses = [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.replace(",", " ").split()
            if len(tok) != 8:
                raise FormatError(f"{path}:{lineno}: expected 8 columns, got {len(tok)}")
            sec = tok[0]
            if "." in sec:
                whole, frac = sec.split(".")
                ns = int(whole) * 1_000_000_000 + int((frac + "000000000")[:9])
            else:
                ns = int(sec) * 1_000_000_000
            vals = np.array(tok[1:], dtype=float)
            q = vals[3:]
            q = q / np.linalg.norm(q)
            stamps.append(ns)
            poses.append(PoseSE3(from_quaternion(q), vals[:3]))
    return Trajectory(stamps, poses)


# --- manifest -------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    kind: str
    timestamp: int
    path: Path


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    base = path.parent
    entries = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != ["kind", "timestamp_ns", "path"]:
            raise FormatError(f"{path}: header must be 'kind,timestamp_ns,path'")
        for lineno, row in enumerate(reader, 2):
            kind = row["kind"].strip()
            if kind not in ("lidar", "image"):
                raise FormatError(f"{path}:{lineno}: unknown kind {kind!r}")
            p = Path(row["path"].strip())
            entries.append(ManifestEntry(kind, int(row["timestamp_ns"]), p if p.is_absolute() else base / p))
    for kind in ("lidar", "image"):
        ts = [e.timestamp for e in entries if e.kind == kind]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise FormatError(f"{path}: {kind} timestamps are not non-decreasing")
    return entries


def write_manifest(path, entries) -> None:
    path = Path(path)
    lines = ["kind,timestamp_ns,path"]
    for e in entries:
        p = Path(e.path)
        try:
            p = p.relative_to(path.parent)
        except ValueError:
            pass
        lines.append(f"{e.kind},{e.timestamp},{p.as_posix()}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
