"""Two congruent panel pairs, red and blue, with the pose estimate started between them.

Aligns the red pair's samples against a map holding both pairs, with and
without color weighting, for a range of seeds and starting offsets.

    python scripts/color_disambiguation.py --seeds 0 1 2 3 4
"""

import argparse

import numpy as np

from carloam import synthetic
from carloam.cloud import PointCloud
from carloam.features import FeatureCloud
from carloam.global_map import GlobalMap, MapConfig
from carloam.optimizer import OptimizerConfig, align
from carloam.se3 import exp_se3


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--offset", type=float, default=0.5, help="separation of the two pairs (m)")
    p.add_argument("--start", type=float, nargs="+", default=None,
                   help="initial x offsets to try (default: midway)")
    p.add_argument("--jitter", type=float, default=0.003)
    args = p.parse_args()

    context, red, blue = synthetic.twin_scene(args.offset)
    gmap = GlobalMap(MapConfig())
    gmap.insert(FeatureCloud(PointCloud.empty(), synthetic.surface_cloud(context + red + blue, 0.05)))
    starts = args.start or [args.offset / 2]
    for seed in args.seeds:
        cloud = synthetic.surface_cloud(context + red, 0.12, args.jitter, np.random.default_rng(seed))
        feats = FeatureCloud(PointCloud.empty(), cloud)
        for x0 in starts:
            errs = []
            for colored in (True, False):
                res = align(feats, gmap, exp_se3([x0, 0, 0, 0, 0, 0]),
                            OptimizerConfig(color_weight_enabled=colored, max_iterations=50))
                errs.append(np.linalg.norm(res.pose.translation) * 1e3)
            print(f"seed {seed} start {x0:.3f} m: error with color {errs[0]:7.1f} mm, without {errs[1]:7.1f} mm")


if __name__ == "__main__":
    main()
