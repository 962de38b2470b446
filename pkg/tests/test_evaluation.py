import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from carloam.evaluation import associate, ate_rmse, consistency_ratio, load_frames, relative_to_first, rpe
from carloam.io import Trajectory, write_colored_ply
from carloam.se3 import PoseSE3, exp_se3, random_pose

SQUARE = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)


def traj(positions, stamps=None, rotations=None):
    n = len(positions)
    stamps = list(range(0, n * 100_000_000, 100_000_000)) if stamps is None else stamps
    rots = [np.eye(3)] * n if rotations is None else rotations
    return Trajectory(list(stamps), [PoseSE3(R, p) for R, p in zip(rots, positions)])


def random_traj(rng, n=30):
    poses, T = [], PoseSE3()
    for _ in range(n):
        T = T @ exp_se3(np.r_[rng.normal(scale=0.2, size=3), rng.normal(scale=0.05, size=3)])
        poses.append(T)
    return Trajectory([k * 100_000_000 for k in range(n)], poses)


def moved(tr, G, right=None):
    right = right or PoseSE3()
    return Trajectory(list(tr.timestamps), [G @ T @ right for T in tr.poses])


def test_ate_identical_is_zero():
    t = random_traj(np.random.default_rng(0))
    assert ate_rmse(t, t) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("offset,expected", [
    # radial offset: rotation cannot help, translation absorbs a quarter
    ([0.1 / np.sqrt(2), 0.1 / np.sqrt(2), 0.0], 0.1 * np.sqrt(3) / 4),
    # values below from an independent multi-start rotation search
    ([0.1, 0.0, 0.0], 0.03962533633303422),
    ([0.0, 0.0, 0.1], 0.02503115270846442),
])
def test_unit_square_single_offset(offset, expected):
    est = SQUARE.copy()
    est[2] += offset
    assert ate_rmse(traj(SQUARE), traj(est)) == pytest.approx(expected, abs=1e-12)


@given(st.integers(0, 10_000))
def test_ate_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    gt = random_traj(rng)
    est = Trajectory(gt.timestamps, [T @ exp_se3(rng.normal(scale=0.01, size=6)) for T in gt.poses])
    base = ate_rmse(gt, est)
    assert abs(ate_rmse(gt, moved(est, random_pose(rng, max_trans=50.0))) - base) < 1e-9


def test_ate_needs_two_pairs():
    t = traj(SQUARE[:1])
    with pytest.raises(ValueError):
        ate_rmse(t, t)
    far = traj(SQUARE, stamps=[5_000_000_000 + k for k in range(4)])
    with pytest.raises(ValueError):
        ate_rmse(traj(SQUARE), far)


def test_association_window_and_uniqueness():
    gt = traj(SQUARE, stamps=[0, 100, 200, 300])
    est = traj(SQUARE[:3], stamps=[4, 96, 20_000_000])
    assert associate(gt, est, window_ns=10) == [(0, 0), (1, 1)]
    est = traj(SQUARE[:2], stamps=[101, 102])
    assert associate(gt, est, window_ns=10) == [(1, 0)]


def test_rpe_identical_is_zero():
    t = random_traj(np.random.default_rng(1))
    tr, rot = rpe(t, t, delta=3)
    assert len(tr) == len(t) - 3
    assert np.allclose(tr, 0, atol=1e-12) and np.allclose(rot, 0, atol=1e-5)


@given(st.integers(0, 10_000))
def test_rpe_offset_invariance(seed):
    rng = np.random.default_rng(seed)
    gt = random_traj(rng)
    est = Trajectory(gt.timestamps, [T @ exp_se3(rng.normal(scale=0.01, size=6)) for T in gt.poses])
    tr, rot = rpe(gt, est, delta=2)
    tr2, rot2 = rpe(moved(gt, random_pose(rng, max_trans=20)), moved(est, random_pose(rng, max_trans=20)), delta=2)
    assert np.abs(tr - tr2).max() < 1e-9
    assert np.abs(rot - rot2).max() < 1e-6  # degrees; arctan2 keeps this tight


def test_rpe_constant_global_offset_is_zero():
    gt = random_traj(np.random.default_rng(2))
    tr, _ = rpe(gt, moved(gt, PoseSE3(np.eye(3), [3.0, -1.0, 2.0])))
    assert np.allclose(tr, 0, atol=1e-12)


def test_rpe_single_corrupted_step():
    n, j = 10, 4
    gt = np.c_[np.arange(n, dtype=float), np.zeros((n, 2))]
    est = gt.copy()
    est[j + 1:] += [0.0, 0.1, 0.0]  # one step moves 0.1 m sideways, the rest follow
    tr, _ = rpe(traj(gt), traj(est), delta=1)
    assert np.count_nonzero(tr > 1e-12) == 1
    assert tr[j] == pytest.approx(0.1, abs=1e-12)


def test_rpe_rejects_bad_delta():
    t = traj(SQUARE)
    for d in (0, 4, 10):
        with pytest.raises(ValueError):
            rpe(t, t, delta=d)


def brute_ratio(frames, thresholds):
    out = []
    for prev, cur in zip(frames[:-1], frames[1:]):
        d = cdist(cur, prev).min(axis=1)
        out.append([float(np.mean(d < t)) for t in thresholds])
    return out


@pytest.mark.parametrize("seed", range(3))
def test_consistency_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    frames = [rng.uniform(0, 0.02, (rng.integers(50, 400), 3)) for _ in range(4)]
    th = [1e-4, 5e-4, 1e-3, 2e-3]
    rep = consistency_ratio(frames, th)
    oracle = brute_ratio(frames, th)
    assert rep["pairs"] == oracle
    assert rep["average"] == pytest.approx(np.mean(oracle, axis=0).tolist(), abs=1e-15)


def test_consistency_examples():
    cloud = np.random.default_rng(3).uniform(0, 1, (300, 3))
    assert consistency_ratio([cloud, cloud], [1e-6, 1e-3])["average"] == [1.0, 1.0]
    assert consistency_ratio([cloud, cloud + [0.002, 0, 0]], [1e-3])["average"] == [0.0]


def test_consistency_skips_empty_frames():
    a = np.zeros((3, 3))
    rep = consistency_ratio([a, np.zeros((0, 3)), a], [1e-3])
    assert rep["pairs"] == [[1.0]]
    with pytest.raises(ValueError):
        consistency_ratio([a, np.zeros((0, 3))])


def test_load_frames(tmp_path):
    rng = np.random.default_rng(4)
    clouds = [rng.normal(size=(20, 3)) for _ in range(3)]
    for k, c in enumerate(clouds):
        write_colored_ply(tmp_path / f"frame_{k:04d}.ply", c, np.zeros((20, 3), np.uint8))
    loaded = load_frames(tmp_path)
    assert all(np.allclose(a, b, atol=1e-5) for a, b in zip(loaded, clouds))
    with pytest.raises(FileNotFoundError):
        load_frames(tmp_path / "missing")


def test_relative_to_first():
    t = random_traj(np.random.default_rng(5))
    r = relative_to_first(t)
    assert np.allclose(r.poses[0].matrix(), np.eye(4), atol=1e-12)
    assert ate_rmse(t, r) < 1e-9
