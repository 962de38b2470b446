"""Command line entry point: ``carloam run | eval | synth``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import evaluation, io, synthetic
from .pipeline import InputError, load_config, run

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3

log = logging.getLogger("carloam")


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=1))


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, TypeError) as exc:
        raise InputError(f"bad config {args.config}: {exc}") from exc
    if args.threads is not None:
        from .pipeline import with_overrides
        cfg = with_overrides(cfg, optimizer={"workers": args.threads})
    result = run(args.manifest, args.calib, cfg, args.out)
    n_low = sum(r.low_confidence for r in result.records)
    print(f"{len(result.records)} scans, {n_low} low-confidence; outputs in {result.out}")
    return EXIT_DEGENERATE if result.degenerate else EXIT_OK


def _load_pair(args):
    try:
        return io.read_tum(args.gt), io.read_tum(args.est)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _cmd_ate(args) -> int:
    gt, est = _load_pair(args)
    try:
        value = evaluation.ate_rmse(gt, est, args.window_ms * 1_000_000)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _print_json({"ate_rmse": value, "associated": len(evaluation.associate(gt, est, args.window_ms * 1_000_000))})
    return EXIT_OK


def _cmd_rpe(args) -> int:
    gt, est = _load_pair(args)
    try:
        trans, rot = evaluation.rpe(gt, est, args.delta, args.window_ms * 1_000_000)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = {
        "delta": args.delta,
        "trans_rmse": float(np.sqrt(np.mean(trans**2))),
        "rot_rmse_deg": float(np.sqrt(np.mean(rot**2))),
        "rpe_trans": trans.tolist(),
        "rpe_rot": rot.tolist(),
    }
    if args.csv:
        lines = ["index,trans_m,rot_deg"] + [f"{k},{t:.9g},{r:.9g}" for k, (t, r) in enumerate(zip(trans, rot))]
        io.atomic_write_bytes(args.csv, ("\n".join(lines) + "\n").encode())
    _print_json(report)
    return EXIT_OK


def _cmd_consistency(args) -> int:
    try:
        frames = evaluation.load_frames(args.frames)
        report = evaluation.consistency_ratio(frames, args.thresholds)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    _print_json(report)
    return EXIT_OK


def _cmd_synth(args) -> int:
    try:
        scene = synthetic.load_scene(args.scene, args.scans)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"bad scene {args.scene}: {exc}") from exc
    ds = synthetic.generate(scene, seed=args.seed, noise=args.noise, outlier_fraction=args.outliers,
                            images=not args.no_images)
    out = synthetic.write_dataset(ds, args.out)
    print(f"wrote {len(ds.scans)} scans to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="carloam", description="Color-assisted robust LiDAR odometry.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run odometry over a dataset manifest")
    r.add_argument("--manifest", required=True)
    r.add_argument("--calib", default=None)
    r.add_argument("--config", default=None, help="JSON file mirroring PipelineConfig")
    r.add_argument("--out", default=".")
    r.add_argument("--threads", type=int, default=None, help="optimizer worker threads")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("eval", help="trajectory and map metrics")
    esub = e.add_subparsers(dest="metric", required=True)
    for name, func in (("ate", _cmd_ate), ("rpe", _cmd_rpe)):
        m = esub.add_parser(name)
        m.add_argument("--gt", required=True)
        m.add_argument("--est", required=True)
        m.add_argument("--window-ms", type=float, default=10.0, help="timestamp association window")
        m.set_defaults(func=func)
        if name == "rpe":
            m.add_argument("--delta", type=int, default=1)
            m.add_argument("--csv", default=None, help="also write the per-step series here")
    c = esub.add_parser("consistency")
    c.add_argument("--frames", required=True, help="directory of registered frame PLY files")
    c.add_argument("--thresholds", type=float, nargs="+", default=[1e-4, 5e-4, 1e-3])
    c.set_defaults(func=_cmd_consistency)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--scene", default="hall", help="built-in scene name or scene JSON file")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scans", type=int, default=50)
    s.add_argument("--noise", type=float, default=None, help="range noise sigma in meters")
    s.add_argument("--outliers", type=float, default=0.0, help="outlier fraction per scan")
    s.add_argument("--no-images", action="store_true")
    s.set_defaults(func=_cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
