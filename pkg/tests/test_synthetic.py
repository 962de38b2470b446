import hashlib

import numpy as np
import pytest

from carloam import synthetic
from carloam.camera import CameraModel
from carloam.cloud import PointCloud
from carloam.se3 import PoseSE3

SMALL = synthetic.LidarSpec(lines=16, points_per_line=60)


def distance_to_surfaces(patches, pts):
    best = np.full(len(pts), np.inf)
    for p in patches:
        rel = pts - p.origin
        a = np.clip(rel @ p.u_axis, 0, p.extent_u)
        b = np.clip(rel @ p.v_axis, 0, p.extent_v)
        near = p.origin + a[:, None] * p.u_axis + b[:, None] * p.v_axis
        best = np.minimum(best, np.linalg.norm(pts - near, axis=1))
    return best


@pytest.mark.parametrize("name", ["hall", "corridor", "wall"])
def test_noiseless_scan_lies_on_surfaces(name):
    scene = synthetic.make_scene(name, 3)
    T = scene.poses[1]
    scan = synthetic.simulate_scan(scene, T, SMALL, np.random.default_rng(0), noise=0.0)
    assert len(scan) > 0
    assert distance_to_surfaces(scene.patches, T.apply(scan.xyz)).max() < 1e-9


def test_range_noise_level():
    scene = synthetic.make_scene("hall", 2)
    T = scene.poses[0]
    clean = synthetic.simulate_scan(scene, T, SMALL, np.random.default_rng(0), noise=0.0)
    noisy = synthetic.simulate_scan(scene, T, SMALL, np.random.default_rng(0), noise=0.005)
    dr = np.linalg.norm(noisy.xyz, axis=1) - np.linalg.norm(clean.xyz, axis=1)
    assert 0.004 < dr.std() < 0.006


def test_scan_pattern_and_fov():
    dirs = synthetic.scan_directions(SMALL)
    assert dirs.shape == (16 * 60, 3)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1)
    az = np.degrees(np.arctan2(dirs[:, 1], dirs[:, 0]))
    el = np.degrees(np.arcsin(dirs[:, 2]))
    assert np.abs(az).max() <= 70.4 / 2 + 1e-9 and np.abs(el).max() <= 77.2 / 2 + 1e-9


def test_empty_scan_warns(caplog):
    scene = synthetic.make_scene("wall", 2)
    away = PoseSE3(np.diag([-1.0, -1.0, 1.0]), scene.poses[0].translation)
    scan = synthetic.simulate_scan(scene, away, SMALL, np.random.default_rng(0))
    assert len(scan) == 0 and "empty scan" in caplog.text


def test_red_wall_renders_red():
    wall = synthetic.Patch(np.array([5.0, -50, -50]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]),
                           100, 100, (255, 0, 0))
    scene = synthetic.SyntheticScene([wall], [0], [PoseSE3()])
    img = synthetic.render_image(scene, PoseSE3(), synthetic.default_camera())
    assert np.all(img.pixels == [255, 0, 0])


def test_outlier_count_and_distance():
    scene = synthetic.make_scene("hall", 2)
    T = scene.poses[0]
    scan = synthetic.simulate_scan(scene, T, synthetic.LidarSpec(lines=64, points_per_line=200), np.random.default_rng(0))
    scan = scan.subset(np.arange(1000))
    lo, hi = scene.bounds()
    out = synthetic.inject_outliers(scan, 0.3, 5, lo, hi, pose=T)
    mask = out.extras["outlier"]
    assert mask.sum() == 300
    assert np.array_equal(out.xyz[~mask], scan.xyz[~mask])
    d = distance_to_surfaces(scene.patches, T.apply(out.xyz[mask]))
    assert np.median(d) > 10 * 0.005
    assert synthetic.inject_outliers(scan, 0.0, 5) is scan
    with pytest.raises(ValueError):
        synthetic.inject_outliers(scan, 1.0, 5)


def test_outliers_default_to_scan_box():
    cloud = PointCloud(np.random.default_rng(1).uniform(-1, 1, (500, 3)))
    out = synthetic.inject_outliers(cloud, 0.5, 0)
    assert (out.xyz >= cloud.xyz.min(0)).all() and (out.xyz <= cloud.xyz.max(0)).all()


def _digest(directory):
    h = hashlib.sha256()
    for p in sorted(directory.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(directory).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_generation_is_deterministic(tmp_path):
    scene = synthetic.make_scene("corridor", 3)
    digests = []
    for k in range(2):
        ds = synthetic.generate(scene, lidar=SMALL, seed=11, outlier_fraction=0.1)
        digests.append(_digest(synthetic.write_dataset(ds, tmp_path / str(k))))
    assert digests[0] == digests[1]
    other = synthetic.generate(scene, lidar=SMALL, seed=12, outlier_fraction=0.1)
    assert _digest(synthetic.write_dataset(other, tmp_path / "x")) != digests[0]


def test_dataset_files(tmp_path):
    ds = synthetic.generate(synthetic.make_scene("wall", 4), lidar=SMALL, seed=0)
    out = synthetic.write_dataset(ds, tmp_path)
    for name in ("manifest.csv", "calib.json", "groundtruth.txt", "scene.json"):
        assert (out / name).is_file()
    assert len(list((out / "scans").glob("*.ply"))) == 4
    assert len(list((out / "images").glob("*.png"))) == 4


def test_scene_json_roundtrip(tmp_path):
    scene = synthetic.make_scene("hall", 5)
    d = synthetic.scene_to_dict(scene)
    again = synthetic.scene_from_dict(d)
    assert len(again.patches) == len(scene.patches)
    assert again.timestamps == scene.timestamps
    for a, b in zip(scene.poses, again.poses):
        assert np.allclose(a.matrix(), b.matrix(), atol=1e-12)


def test_unknown_scene():
    with pytest.raises((KeyError, ValueError)):
        synthetic.make_scene("castle")


def test_timestamps_strictly_increase():
    scene = synthetic.make_scene("hall", 50)
    assert all(b > a for a, b in zip(scene.timestamps, scene.timestamps[1:]))


@pytest.mark.parametrize("name", ["hall", "corridor"])
def test_shorter_presets_are_prefixes(name):
    short, full = synthetic.make_scene(name, 20), synthetic.make_scene(name, 50)
    assert short.timestamps == full.timestamps[:20]
    for a, b in zip(short.poses, full.poses):
        assert np.array_equal(a.matrix(), b.matrix())
