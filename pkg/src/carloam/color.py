"""sRGB -> CIELAB conversion and the CIEDE2000 color difference.

Inputs are sRGB with a D65 white point and the 2 degree observer. The
functions are vectorized over leading axes: an ``(..., 3)`` array in,
``(...,)`` or ``(..., 3)`` out.
"""

from __future__ import annotations

import numpy as np

# D65 reference white, 2 degree observer
WHITE_D65 = np.array([0.95047, 1.0, 1.08883])

_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)

_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


def srgb_to_linear(c):
    c = np.asarray(c, dtype=float)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def srgb_to_lab(rgb) -> np.ndarray:
    """8-bit sRGB triples to ``(L*, a*, b*)``."""
    rgb = np.asarray(rgb, dtype=float)
    if np.any(rgb < 0) or np.any(rgb > 255):
        raise ValueError("sRGB channels must lie in [0, 255]")
    lin = srgb_to_linear(rgb / 255.0)
    xyz = lin @ _SRGB_TO_XYZ.T / WHITE_D65
    f = np.where(xyz > _EPS, np.cbrt(xyz), (_KAPPA * xyz + 16.0) / 116.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def lab_to_lch(lab) -> np.ndarray:
    lab = np.asarray(lab, dtype=float)
    C = np.hypot(lab[..., 1], lab[..., 2])
    h = np.degrees(np.arctan2(lab[..., 2], lab[..., 1])) % 360.0
    return np.stack([lab[..., 0], C, h], axis=-1)


def ciede2000(lab1, lab2, kL: float = 1.0, kC: float = 1.0, kH: float = 1.0):
    """CIEDE2000 difference between two CIELAB colors (or arrays of them)."""
    lab1 = np.asarray(lab1, dtype=float)
    lab2 = np.asarray(lab2, dtype=float)
    L1, a1, b1 = lab1[..., 0], lab1[..., 1], lab1[..., 2]
    L2, a2, b2 = lab2[..., 0], lab2[..., 1], lab2[..., 2]

    C_bar = 0.5 * (np.hypot(a1, b1) + np.hypot(a2, b2))
    C_bar7 = C_bar**7
    G = 0.5 * (1.0 - np.sqrt(C_bar7 / (C_bar7 + 25.0**7)))
    a1p = (1.0 + G) * a1
    a2p = (1.0 + G) * a2
    C1p = np.hypot(a1p, b1)
    C2p = np.hypot(a2p, b2)

    # hue is undefined (set to 0) for achromatic colors
    h1p = np.where(C1p == 0, 0.0, np.degrees(np.arctan2(b1, a1p)) % 360.0)
    h2p = np.where(C2p == 0, 0.0, np.degrees(np.arctan2(b2, a2p)) % 360.0)

    dLp = L2 - L1
    dCp = C2p - C1p

    diff = h2p - h1p
    # antipodal hues can land a few ulps past 180 after the mod; treat as exact
    diff = np.where(np.abs(np.abs(diff) - 180.0) < 1e-9, np.sign(diff) * 180.0, diff)
    chroma_zero = (C1p * C2p) == 0
    dhp = np.where(diff > 180.0, diff - 360.0, np.where(diff < -180.0, diff + 360.0, diff))
    dhp = np.where(chroma_zero, 0.0, dhp)
    dHp = 2.0 * np.sqrt(C1p * C2p) * np.sin(np.radians(dhp) / 2.0)

    L_barp = 0.5 * (L1 + L2)
    C_barp = 0.5 * (C1p + C2p)
    hsum = h1p + h2p
    h_barp = np.where(
        np.abs(diff) <= 180.0,
        0.5 * hsum,
        np.where(hsum < 360.0, 0.5 * (hsum + 360.0), 0.5 * (hsum - 360.0)),
    )
    h_barp = np.where(chroma_zero, hsum, h_barp)

    T = (
        1.0
        - 0.17 * np.cos(np.radians(h_barp - 30.0))
        + 0.24 * np.cos(np.radians(2.0 * h_barp))
        + 0.32 * np.cos(np.radians(3.0 * h_barp + 6.0))
        - 0.20 * np.cos(np.radians(4.0 * h_barp - 63.0))
    )
    d_theta = 30.0 * np.exp(-(((h_barp - 275.0) / 25.0) ** 2))
    C_barp7 = C_barp**7
    R_C = 2.0 * np.sqrt(C_barp7 / (C_barp7 + 25.0**7))
    Lm50 = (L_barp - 50.0) ** 2
    S_L = 1.0 + 0.015 * Lm50 / np.sqrt(20.0 + Lm50)
    S_C = 1.0 + 0.045 * C_barp
    S_H = 1.0 + 0.015 * C_barp * T
    R_T = -np.sin(np.radians(2.0 * d_theta)) * R_C

    tL = dLp / (kL * S_L)
    tC = dCp / (kC * S_C)
    tH = dHp / (kH * S_H)
    return np.sqrt(np.maximum(tL * tL + tC * tC + tH * tH + R_T * tC * tH, 0.0))


def color_difference_rgb(rgb1, rgb2):
    return ciede2000(srgb_to_lab(rgb1), srgb_to_lab(rgb2))
