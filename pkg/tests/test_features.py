import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carloam import synthetic as sy
from carloam.cloud import PointCloud
from carloam.features import (
    FeatureConfig, extract_features, reliable_mask, segment_ids, select_reliable, smoothness,
    smoothness_all, split_lines,
)
from carloam.se3 import PoseSE3, exp_se3

S2 = np.sqrt(0.5)


def scan_of(patches, lines=16, ppl=60, pose=PoseSE3.identity(), noise=0.0, seed=0):
    scene = sy.SyntheticScene(list(patches), [0], [pose])
    spec = sy.LidarSpec(lines=lines, points_per_line=ppl, stagger=False)
    return sy.simulate_scan(scene, pose, spec, np.random.default_rng(seed), noise=noise)


def wall(x=5.0, color=(120, 120, 120)):
    return sy.Patch([x, -20, -20], [0, 1, 0], [0, 0, 1], 40, 40, color)


def corner():
    # convex vertical edge at (3, 0) facing the sensor, gray wall behind
    a = sy.Patch([3, 0, -3], [S2, -S2, 0], [0, 0, 1], 2.5, 6.0, (200, 50, 50))
    b = sy.Patch([3, 0, -3], [S2, S2, 0], [0, 0, 1], 2.5, 6.0, (50, 50, 200))
    return [a, b, wall(9.0)]


def test_collinear_interior_is_zero():
    line = np.c_[np.linspace(1, 2, 21), np.full(21, 0.5), np.zeros(21)]
    assert smoothness(line, 10, 5) == pytest.approx(0.0, abs=1e-15)
    assert smoothness(line, 3, 5) is None


def test_corner_beats_flat_and_outlier_beats_corner():
    flat = np.c_[np.full(11, 4.0), np.linspace(-1, 1, 11), np.zeros(11)]
    c_flat = smoothness(flat, 5, 5)
    # 90 degree corner: five points on each wall meeting at the vertex
    t = np.linspace(0.2, 1.0, 5)
    left = np.c_[4.0 - t[::-1], -t[::-1], np.zeros(5)]
    right = np.c_[4.0 - t, t, np.zeros(5)]
    vertex = np.array([[4.0, 0.0, 0.0]])
    c_corner = smoothness(np.vstack([left, vertex, right]), 5, 5)
    spike = flat.copy()
    spike[5] = [20.0, 0.0, 0.0]
    c_spike = smoothness(spike, 5, 5)
    assert c_corner > c_flat
    assert c_spike > c_corner


def test_vectorized_matches_scalar():
    scan = scan_of(corner())
    cfg = FeatureConfig()
    lines = split_lines(scan.xyz)
    seg = segment_ids(scan.xyz, lines, cfg)
    c = smoothness_all(scan.xyz, seg, cfg.window)
    for i in np.flatnonzero(~np.isnan(c))[::37]:
        assert c[i] == pytest.approx(smoothness(scan.xyz[i - 5: i + 6], 5, 5), rel=1e-9)


def test_lines_recovered_from_angular_steps():
    scan = scan_of([wall()], lines=12, ppl=40)
    lines = split_lines(scan.xyz)
    assert lines.max() + 1 == 12
    assert np.all(np.bincount(lines) == 40)


def test_blind_points_removed():
    xyz = np.c_[np.full(9, 2.0), np.linspace(-0.1, 0.1, 9), np.zeros(9)]
    xyz[-1] = [0.05, 0.0, 0.0]
    keep = reliable_mask(PointCloud(xyz, np.ones(9)), FeatureConfig())
    assert not keep[-1]
    assert keep[:6].all()  # the two points before the jump are its occlusion fringe


def test_facing_wall_interior_retained():
    scan = scan_of([wall()])
    az = np.degrees(np.arctan2(scan.xyz[:, 1], scan.xyz[:, 0]))
    el = np.degrees(np.arctan2(scan.xyz[:, 2], np.hypot(scan.xyz[:, 0], scan.xyz[:, 1])))
    inner = (np.abs(az) < 25) & (np.abs(el) < 25)
    assert reliable_mask(scan)[inner].all()


def test_far_side_of_range_jump_removed():
    # near points at 2 m then a 1 m jump to 3 m on one line
    y = np.linspace(-1, 1, 20)
    xyz = np.c_[np.where(np.arange(20) < 10, 2.0, 3.0), y * 0.05, np.zeros(20)]
    keep = reliable_mask(PointCloud(xyz, np.ones(20)), FeatureConfig(fov_margin_deg=0.0))
    assert not keep[10] and not keep[11]
    assert keep[9] and keep[12]


def test_low_intensity_removed():
    scan = scan_of([wall()])
    dim = PointCloud(scan.xyz, np.full(len(scan), 1e-3))
    assert not select_reliable(dim).xyz.size


def test_plane_gives_planars_only():
    f = extract_features(scan_of([wall()]))
    assert len(f.edges) == 0
    assert len(f.planars) > 0


def test_box_edge_recall():
    scan = scan_of(corner(), lines=16, ppl=60)
    f = extract_features(scan)
    patch = scan.extras["patch"]
    lines = split_lines(scan.xyz)
    crossing = np.flatnonzero((patch[:-1] != patch[1:]) & (patch[:-1] < 2) & (patch[1:] < 2)
                              & (lines[:-1] == lines[1:]))
    hits = [np.any(np.abs(f.edge_index - i) <= 1) | np.any(np.abs(f.edge_index - (i + 1)) <= 1) for i in crossing]
    assert len(crossing) >= 10
    assert np.mean(hits) >= 0.8


def test_empty_scan():
    f = extract_features(PointCloud.empty())
    assert len(f.edges) == 0 and len(f.planars) == 0


@pytest.mark.parametrize("seed", range(3))
def test_selection_invariants(seed):
    scene = sy.make_scene("hall", 3)
    spec = sy.LidarSpec(lines=24, points_per_line=90)
    scan = sy.simulate_scan(scene, scene.poses[1], spec, np.random.default_rng(seed))
    cfg = FeatureConfig()
    f = extract_features(scan, cfg)
    e, p = set(f.edge_index.tolist()), set(f.planar_index.tolist())
    assert not e & p
    reliable = reliable_mask(scan, cfg)
    assert all(reliable[i] for i in e | p)
    lines = split_lines(scan.xyz)
    for idx in (f.edge_index, f.planar_index):
        for a, b in zip(idx[:-1], idx[1:]):
            if lines[a] == lines[b]:
                assert b - a > cfg.window
    g = extract_features(scan, cfg)
    assert np.array_equal(f.edge_index, g.edge_index) and np.array_equal(f.planar_index, g.planar_index)


def test_suppression_holds_across_kinds():
    scan = scan_of(corner(), lines=8, ppl=120)
    f = extract_features(scan, FeatureConfig(edge_threshold=0.005))
    both = np.sort(np.concatenate([f.edge_index, f.planar_index]))
    lines = split_lines(scan.xyz)
    same = lines[both[:-1]] == lines[both[1:]]
    assert np.all(np.diff(both)[same] > 5)


def test_transformed_features_move_points():
    f = extract_features(scan_of(corner()))
    T = exp_se3([1, 2, 3, 0.1, 0.2, 0.3])
    g = f.transformed(T)
    assert np.allclose(g.planars.xyz, T.apply(f.planars.xyz))
    assert np.array_equal(g.planar_index, f.planar_index)


@given(st.integers(1, 8), st.integers(1, 6))
def test_per_sector_caps(n_h, sectors):
    cfg = FeatureConfig(max_planars_per_sector=n_h, sectors=sectors)
    scan = scan_of([wall()], lines=6, ppl=80)
    f = extract_features(scan, cfg)
    assert len(f.planars) <= 6 * sectors * n_h
