"""Named configurations shared by the experiment scripts and the acceptance suite.

``DENSE`` keeps more planar features per scan line (smaller smoothness
window, higher per-sector cap) and tightens the map-side plane gates. The
64x200 synthetic scans are far denser than the defaults were sized for.
"""

from __future__ import annotations

import copy

from .pipeline import PipelineConfig

DENSE = {
    "features": {"window": 3, "max_planars_per_sector": 8},
    "map": {"plane_fit_tol": 0.02, "planar_voxel": 0.1},
}

# Welsch scale for noise-only sequences; the default 0.2 suits outlier-heavy ones
CLEAN_NU = 0.05


def benchmark(nu: float | None = None, **optimizer) -> PipelineConfig:
    """``DENSE`` plus optional optimizer overrides (``nu`` kept explicit for readability)."""
    d = copy.deepcopy(DENSE)
    opt = dict(optimizer)
    if nu is not None:
        opt["nu"] = nu
    if opt:
        d["optimizer"] = opt
    return PipelineConfig.from_dict(d)
