import numpy as np
import pytest

from pairspec import (
    ConfigError,
    CrystalSpec,
    WavelengthRangeError,
    extraordinary_index,
    ordinary_index,
)

# frozen reference values, computed independently from the published
# coefficients (see notes accompanying the repository)
GOLDEN = {
    ("o", 390e-9): 1.695321632912355,
    ("o", 780e-9): 1.661169185975278,
    ("e_principal", 390e-9): 1.569513605379910,
    ("e_principal", 780e-9): 1.544914808577774,
}


def test_ordinary_index_golden():
    for (kind, lam), value in GOLDEN.items():
        if kind == "o":
            assert ordinary_index(lam) == pytest.approx(value, rel=1e-13)


def test_extraordinary_principal_golden():
    for (kind, lam), value in GOLDEN.items():
        if kind == "e_principal":
            assert extraordinary_index(lam, np.pi / 2) == pytest.approx(value, rel=1e-13)


def test_extraordinary_at_cut_angle_golden():
    n = extraordinary_index(390e-9, np.deg2rad(29.7))
    assert n == pytest.approx(1.661655900379068, rel=1e-13)


def test_extraordinary_limits_and_ordering():
    lam = 500e-9
    assert extraordinary_index(lam, 0.0) == pytest.approx(ordinary_index(lam), rel=1e-14)
    n_mid = extraordinary_index(lam, 0.7)
    assert extraordinary_index(lam, np.pi / 2) < n_mid < ordinary_index(lam)


def test_normal_dispersion():
    lams = np.linspace(350e-9, 950e-9, 31)
    n = ordinary_index(lams)
    assert np.all(np.diff(n) < 0)


def test_wavelength_band_enforced():
    with pytest.raises(WavelengthRangeError, match="300"):
        ordinary_index(250e-9)
    with pytest.raises(WavelengthRangeError, match="1000"):
        extraordinary_index(1100e-9, 0.3)
    # array inputs are screened too
    with pytest.raises(WavelengthRangeError):
        ordinary_index(np.array([500e-9, 1500e-9]))


def test_theta_domain():
    with pytest.raises(ConfigError):
        extraordinary_index(500e-9, -0.1)
    with pytest.raises(ConfigError):
        extraordinary_index(500e-9, 2.0)


def test_crystal_spec_validation():
    with pytest.raises(ConfigError):
        CrystalSpec(length_m=0.0)
    with pytest.raises(ConfigError):
        CrystalSpec(cut_angle_rad=2.0)
    with pytest.raises(ConfigError, match="unknown sellmeier set"):
        CrystalSpec(sellmeier_set="nope")
    assert "Kato" in CrystalSpec().sellmeier_source
