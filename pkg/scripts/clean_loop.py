"""Sequential odometry on noise-free and noisy synthetic sequences.

Compares the default configuration against the dense benchmark preset at a
few Welsch scales.

    python scripts/clean_loop.py --scene hall --scans 50
"""

import argparse
import time

from carloam import presets, synthetic
from carloam.evaluation import ate_rmse
from carloam.pipeline import PipelineConfig, run_dataset


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scene", default="hall")
    p.add_argument("--scans", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.005])
    p.add_argument("--nu", type=float, nargs="+", default=[presets.CLEAN_NU, 0.2])
    args = p.parse_args()

    configs = {"default": PipelineConfig()}
    configs.update({f"dense nu={nu:g}": presets.benchmark(nu=nu) for nu in args.nu})
    scene = synthetic.make_scene(args.scene, args.scans)
    for noise in args.noise:
        ds = synthetic.generate(scene, seed=args.seed, noise=noise)
        for name, cfg in configs.items():
            t0 = time.perf_counter()
            est = run_dataset(ds, cfg)
            print(f"noise {noise * 1e3:4.1f} mm  {name:16s} ATE {ate_rmse(ds.ground_truth, est) * 1e3:8.3f} mm"
                  f"  low-confidence {len(est.comments)}  {time.perf_counter() - t0:.0f} s", flush=True)


if __name__ == "__main__":
    main()
