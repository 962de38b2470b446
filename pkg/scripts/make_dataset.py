"""Generate a synthetic dataset and run odometry on it end to end through files.

    python scripts/make_dataset.py --out /tmp/hall --scans 50 --outliers 0.3
"""

import argparse
import json
from pathlib import Path

from carloam import io, presets, synthetic
from carloam.evaluation import ate_rmse, rpe
from carloam.pipeline import run


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", required=True)
    p.add_argument("--scene", default="hall")
    p.add_argument("--scans", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.005)
    p.add_argument("--outliers", type=float, default=0.0)
    p.add_argument("--nu", type=float, default=None)
    args = p.parse_args()

    out = Path(args.out)
    scene = synthetic.load_scene(args.scene, args.scans)
    ds = synthetic.generate(scene, seed=args.seed, noise=args.noise, outlier_fraction=args.outliers)
    data = synthetic.write_dataset(ds, out / "data")
    cfg = presets.benchmark(nu=args.nu)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1))
    res = run(data / "manifest.csv", data / "calib.json", cfg, out / "run")
    gt = io.read_tum(data / "groundtruth.txt")
    est = io.read_tum(out / "run" / "trajectory.txt")
    trans, rot = rpe(gt, est)
    print(f"{len(res.records)} scans, ATE {ate_rmse(gt, est) * 1e3:.2f} mm, "
          f"RPE {trans.mean() * 1e3:.2f} mm / {rot.mean():.3f} deg per scan")


if __name__ == "__main__":
    main()
