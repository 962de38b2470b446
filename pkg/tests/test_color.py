import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from skimage.color import deltaE_ciede2000, rgb2lab

from carloam.color import ciede2000, color_difference_rgb, lab_to_lch, srgb_to_lab

from sharma_pairs import SHARMA_PAIRS

rgb8 = st.lists(st.integers(0, 255), min_size=3, max_size=3).map(np.array)


def test_conformance_pairs():
    t = np.array(SHARMA_PAIRS)
    got = ciede2000(t[:, :3], t[:, 3:6])
    assert np.max(np.abs(got - t[:, 6])) < 1e-4


def test_conformance_pairs_symmetric():
    t = np.array(SHARMA_PAIRS)
    assert np.allclose(ciede2000(t[:, 3:6], t[:, :3]), t[:, 6], atol=1e-4)


def test_reference_white_and_black():
    L, a, b = srgb_to_lab([255, 255, 255])
    assert np.isclose(L, 100.0, atol=1e-3) and abs(a) < 0.01 and abs(b) < 0.01
    assert np.allclose(srgb_to_lab([0, 0, 0]), 0.0, atol=1e-12)


def test_red_matches_reference_converter():
    ref = rgb2lab(np.array([[[1.0, 0.0, 0.0]]]), illuminant="D65", observer="2")[0, 0]
    assert np.allclose(srgb_to_lab([255, 0, 0]), ref, atol=0.05)


def test_random_colors_match_reference_converter():
    rng = np.random.default_rng(0)
    rgb = rng.integers(0, 256, size=(500, 3))
    ref = rgb2lab((rgb / 255.0)[None], illuminant="D65", observer="2")[0]
    assert np.allclose(srgb_to_lab(rgb), ref, atol=0.05)


def test_rgb_difference_against_reference_pipeline():
    ref = deltaE_ciede2000(rgb2lab(np.zeros((1, 1, 3))), rgb2lab(np.ones((1, 1, 3))))[0, 0]
    assert np.isclose(color_difference_rgb([0, 0, 0], [255, 255, 255]), ref, atol=1e-3)


@given(rgb8, st.integers(0, 2), st.sampled_from([-1, 1]))
def test_one_step_change_is_small(c, ch, step):
    d = c.copy()
    d[ch] = np.clip(d[ch] + step, 0, 255)
    assert color_difference_rgb(c, d) < 2.0


@given(rgb8, rgb8)
def test_symmetry_and_identity(a, b):
    assert color_difference_rgb(a, a) == 0.0
    assert np.isclose(color_difference_rgb(a, b), color_difference_rgb(b, a), atol=1e-10)


def test_nonnegative_and_indiscernible_on_random_pairs():
    rng = np.random.default_rng(2)
    lab1 = np.c_[rng.uniform(0, 100, 10_000), rng.uniform(-100, 100, (10_000, 2))]
    lab2 = np.c_[rng.uniform(0, 100, 10_000), rng.uniform(-100, 100, (10_000, 2))]
    d = ciede2000(lab1, lab2)
    assert np.all(d > 0)
    assert np.all(ciede2000(lab1, lab1) == 0)


def test_agrees_with_reference_on_random_lab():
    rng = np.random.default_rng(4)
    lab1 = np.c_[rng.uniform(0, 100, 2000), rng.uniform(-80, 80, (2000, 2))]
    lab2 = np.c_[rng.uniform(0, 100, 2000), rng.uniform(-80, 80, (2000, 2))]
    assert np.allclose(ciede2000(lab1, lab2), deltaE_ciede2000(lab1, lab2), atol=1e-6)


@pytest.mark.parametrize("chroma", [0.5, 5.0, 30.0])
def test_continuous_across_hue_wraparound(chroma):
    # b* = +-5e-7 puts the hue just either side of 0/360 degrees
    other = np.array([[60.0, -10.0, 4.0], [50.0, chroma, 2.0], [40.0, 3.0, -25.0]])
    for ref in other:
        p = np.array([50.0, chroma, 5e-7])
        q = np.array([50.0, chroma, -5e-7])
        assert abs(ciede2000(p, ref) - ciede2000(q, ref)) < 1e-6


def test_gray_axis_lightness_is_monotone():
    g = np.arange(256)
    L = srgb_to_lab(np.stack([g, g, g], axis=1))[:, 0]
    assert np.all(np.diff(L) > 0)


def test_lch_hue_range():
    lch = lab_to_lch([[50, -1, -1], [50, 1, 0]])
    assert np.all((lch[:, 2] >= 0) & (lch[:, 2] < 360))
    assert np.isclose(lch[0, 2], 225.0)


def test_rejects_out_of_range_rgb():
    with pytest.raises(ValueError):
        srgb_to_lab([256, 0, 0])
