"""Robust kernels used by the scan matcher.

``welsch`` turns a point-to-feature distance into a bounded residual and
``gaussian_weight`` turns a color difference into a weight in (0, 1].
All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WelschParam:
    nu: float = 0.2

    def __post_init__(self):
        if not (self.nu > 0 and np.isfinite(self.nu)):
            raise ValueError(f"Welsch parameter must be positive, got {self.nu}")


@dataclass(frozen=True)
class GaussianParam:
    sigma: float = 5.0

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ValueError(f"Gaussian parameter must be positive, got {self.sigma}")


def _nu(p) -> float:
    return p.nu if isinstance(p, WelschParam) else WelschParam(float(p)).nu


def _sigma(p) -> float:
    return p.sigma if isinstance(p, GaussianParam) else GaussianParam(float(p)).sigma


def welsch(x, nu=WelschParam()):
    """``1 - exp(-x^2 / (2 nu^2))``."""
    n = _nu(nu)
    x = np.asarray(x, dtype=float)
    return -np.expm1(-(x * x) / (2.0 * n * n))


def welsch_derivative(x, nu=WelschParam()):
    n = _nu(nu)
    x = np.asarray(x, dtype=float)
    return x / (n * n) * np.exp(-(x * x) / (2.0 * n * n))


def gaussian_weight(x, sigma=GaussianParam()):
    """``exp(-x^2 / (2 sigma^2))``."""
    s = _sigma(sigma)
    x = np.asarray(x, dtype=float)
    return np.exp(-(x * x) / (2.0 * s * s))
