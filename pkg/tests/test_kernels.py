import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carloam.kernels import GaussianParam, WelschParam, gaussian_weight, welsch, welsch_derivative

NU = 0.2


def test_welsch_values():
    assert welsch(0.0, NU) == 0.0
    assert np.isclose(welsch(NU, NU), 1 - np.exp(-0.5), atol=1e-12)
    assert np.isclose(welsch(NU, NU), 0.393469, atol=1e-6)
    assert abs(welsch(10 * NU, NU) - 1.0) < 1e-10


def test_welsch_derivative_values():
    assert welsch_derivative(0.0, NU) == 0.0
    assert np.isclose(welsch_derivative(NU, NU), np.exp(-0.5) / NU)


def test_gaussian_values():
    assert gaussian_weight(0.0, 5.0) == 1.0
    assert np.isclose(gaussian_weight(5.0, 5.0), 0.606531, atol=1e-6)
    assert np.isclose(gaussian_weight(25.0, 5.0), 3.73e-6, rtol=1e-3)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan, np.inf])
def test_parameters_must_be_positive(bad):
    with pytest.raises(ValueError):
        WelschParam(bad)
    with pytest.raises(ValueError):
        GaussianParam(bad)
    with pytest.raises(ValueError):
        welsch(1.0, bad)


@given(st.floats(1e-3, 5.0), st.floats(0.01, 2.0))
def test_derivative_matches_finite_difference(x, nu):
    h = 1e-5 * nu
    num = (welsch(x + h, nu) - welsch(x - h, nu)) / (2 * h)
    ana = welsch_derivative(x, nu)
    # relative error, floored at a small fraction of the derivative's peak e^-0.5 / nu
    assert abs(ana - num) <= 1e-6 * max(abs(ana), 1e-3 / nu)


@given(st.floats(0.0, 100.0), st.floats(0.01, 10.0))
def test_kernels_are_complements(x, nu):
    assert np.isclose(welsch(x, nu) + gaussian_weight(x, nu), 1.0, atol=1e-15)


def test_monotone_on_grid():
    x = np.linspace(0, 3, 10_000)
    assert np.all(np.diff(welsch(x, NU)) >= 0)
    assert np.all(np.diff(gaussian_weight(x, 5.0)) <= 0)
    d = welsch_derivative(x, NU)
    assert np.all(d >= 0)
    assert abs(x[np.argmax(d)] - NU) < 2 * (x[1] - x[0])


def test_vectorized_shapes():
    x = np.zeros((4, 5))
    assert welsch(x).shape == (4, 5)
    assert gaussian_weight(x).shape == (4, 5)
