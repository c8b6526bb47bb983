"""Uniaxial crystal dispersion for the down-conversion source.

Refractive indices come from named Sellmeier coefficient sets of the form

    n^2 = A + B / (lam^2 + C) + D * lam^2     (lam in micrometres)

The pump propagates as an extraordinary wave at the cut angle to the optic
axis; the down-converted pair is ordinary. All quantities are SI: wavelengths
in metres, angles in radians.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, WavelengthRangeError

# Supported band of the shipped coefficient sets.
WAVELENGTH_BAND_M = (300e-9, 1000e-9)

# Coefficients keyed by set name; each entry carries its literature source so
# configs can record exactly which dispersion data produced a result.
SELLMEIER_SETS = {
    "bbo-kato-1986": {
        "ordinary": (2.7359, 0.01878, -0.01822, -0.01354),
        "extraordinary": (2.3753, 0.01224, -0.01667, -0.01516),
        "source": "K. Kato, IEEE J. Quantum Electron. QE-22, 1013 (1986)",
    },
}

DEFAULT_SELLMEIER_SET = "bbo-kato-1986"


@dataclass(frozen=True)
class CrystalSpec:
    """Nonlinear crystal: length, cut angle and dispersion data set."""

    length_m: float = 1e-3
    cut_angle_rad: float = np.deg2rad(29.7)
    sellmeier_set: str = DEFAULT_SELLMEIER_SET

    def __post_init__(self):
        if not self.length_m > 0:
            raise ConfigError(f"crystal length must be positive, got {self.length_m}")
        if not 0.0 <= self.cut_angle_rad <= np.pi / 2:
            raise ConfigError(
                f"cut angle must lie in [0, pi/2] rad, got {self.cut_angle_rad}"
            )
        if self.sellmeier_set not in SELLMEIER_SETS:
            known = ", ".join(sorted(SELLMEIER_SETS))
            raise ConfigError(
                f"unknown sellmeier set {self.sellmeier_set!r}; available: {known}"
            )

    @property
    def sellmeier_source(self) -> str:
        return SELLMEIER_SETS[self.sellmeier_set]["source"]


def _check_band(wavelength_m):
    lo, hi = WAVELENGTH_BAND_M
    w = np.asarray(wavelength_m, dtype=float)
    if np.any(w < lo) or np.any(w > hi):
        raise WavelengthRangeError(
            f"wavelength outside supported band [{lo*1e9:.0f}, {hi*1e9:.0f}] nm"
        )
    return w


def _n_squared(coeffs, wavelength_m):
    a, b, c, d = coeffs
    lam_um_sq = (np.asarray(wavelength_m) * 1e6) ** 2
    return a + b / (lam_um_sq + c) + d * lam_um_sq


def ordinary_index(wavelength_m, spec: CrystalSpec = CrystalSpec()):
    """Ordinary refractive index n_o(lambda).

    Parameters
    ----------
    wavelength_m : float or ndarray
        Vacuum wavelength in metres, within the supported band.
    spec : CrystalSpec
        Selects the coefficient set.

    Returns
    -------
    float or ndarray
    """
    w = _check_band(wavelength_m)
    return np.sqrt(_n_squared(SELLMEIER_SETS[spec.sellmeier_set]["ordinary"], w))


def extraordinary_index(wavelength_m, theta_rad, spec: CrystalSpec = CrystalSpec()):
    """Extraordinary index n_e(lambda, theta) at angle theta to the optic axis.

    Uses the uniaxial index ellipsoid:
    1/n^2(theta) = cos^2(theta)/n_o^2 + sin^2(theta)/n_e^2.
    """
    w = _check_band(wavelength_m)
    theta = np.asarray(theta_rad, dtype=float)
    if np.any(theta < 0) or np.any(theta > np.pi / 2):
        raise ConfigError(f"theta must lie in [0, pi/2] rad")
    coeffs = SELLMEIER_SETS[spec.sellmeier_set]
    no2 = _n_squared(coeffs["ordinary"], w)
    ne2 = _n_squared(coeffs["extraordinary"], w)
    inv = np.cos(theta) ** 2 / no2 + np.sin(theta) ** 2 / ne2
    return 1.0 / np.sqrt(inv)
