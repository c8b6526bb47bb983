import numpy as np
import pytest

from pairspec import (
    CollectionSpec,
    ConfigError,
    CrystalSpec,
    FrequencyGrid,
    JointSpectrum,
    NumericError,
    ParaxialDomainError,
    PumpSpec,
    QuadratureConvergenceError,
    TWO_PI_C,
    joint_amplitude,
    joint_intensity,
    longitudinal_mismatch,
    marginals,
    omega_to_wavelength,
    pump_envelope,
    spectrum_moments,
    wavelength_to_omega,
)
from pairspec.spdc import _whitened_nodes


def small_grid(center_a_nm=899.0, center_b_nm=690.0, half_nm=6.0, n=5):
    return FrequencyGrid.from_wavelength_bounds(
        ((center_a_nm - half_nm) * 1e-9, (center_a_nm + half_nm) * 1e-9),
        ((center_b_nm - half_nm) * 1e-9, (center_b_nm + half_nm) * 1e-9),
        n,
        n,
    )


def test_wavelength_omega_round_trip():
    lam = np.array([400e-9, 780e-9, 999e-9])
    assert omega_to_wavelength(wavelength_to_omega(lam)) == pytest.approx(lam, rel=1e-15)
    assert wavelength_to_omega(780e-9) == pytest.approx(2.4149379068e15, rel=1e-9)


def test_two_pi_c_value():
    assert TWO_PI_C == pytest.approx(1.8836515673089e9, rel=1e-12)


def test_pump_envelope_half_width():
    pump = PumpSpec()
    tau = pump.duration_fwhm_s
    w0 = pump.center_omega
    # amplitude squared falls to 1/2 at detuning 2 ln 2 / tau
    det = 2.0 * np.log(2.0) / tau
    val = pump_envelope(pump, np.array([w0, w0 + det, w0 - det]))
    assert val[0] == pytest.approx(1.0)
    assert val[1] ** 2 == pytest.approx(0.5, rel=1e-12)
    assert val[2] == pytest.approx(val[1], rel=1e-14)


def test_longitudinal_mismatch_golden():
    crystal = CrystalSpec()
    w_deg = wavelength_to_omega(780e-9)
    dk = longitudinal_mismatch(crystal, np.array([w_deg]), np.array([w_deg]))
    assert dk[0] == pytest.approx(7841.325104330, rel=1e-9)
    wa = wavelength_to_omega(899e-9)
    wb = wavelength_to_omega(690e-9)
    dk2 = longitudinal_mismatch(crystal, np.array([wa]), np.array([wb]))
    assert dk2[0] == pytest.approx(-955.102349279, rel=1e-9)


def test_longitudinal_mismatch_transverse_terms():
    # explicit finite-q value must follow the paraxial expansion exactly
    crystal = CrystalSpec()
    wa = wavelength_to_omega(899e-9)
    wb = wavelength_to_omega(690e-9)
    c = 299792458.0
    from pairspec.crystal import extraordinary_index, ordinary_index

    qa = (2e4, -1e4)
    qb = (-3e4, 5e3)
    base = longitudinal_mismatch(crystal, np.array([wa]), np.array([wb]))[0]
    full = longitudinal_mismatch(
        crystal,
        np.array([wa]),
        np.array([wb]),
        q_ax=np.array([qa[0]]),
        q_ay=np.array([qa[1]]),
        q_bx=np.array([qb[0]]),
        q_by=np.array([qb[1]]),
    )[0]
    ws = wa + wb
    kp = extraordinary_index(2 * np.pi * c / ws, crystal.cut_angle_rad) * ws / c
    ka = ordinary_index(2 * np.pi * c / wa) * wa / c
    kb = ordinary_index(2 * np.pi * c / wb) * wb / c
    qs2 = (qa[0] + qb[0]) ** 2 + (qa[1] + qb[1]) ** 2
    expected = (
        base
        - qs2 / (2 * kp)
        + (qa[0] ** 2 + qa[1] ** 2) / (2 * ka)
        + (qb[0] ** 2 + qb[1] ** 2) / (2 * kb)
    )
    assert full == pytest.approx(expected, rel=1e-12)


def test_paraxial_domain_guard():
    crystal = CrystalSpec()
    wa = wavelength_to_omega(780e-9)
    k = 1.66 * wa / 299792458.0
    with pytest.raises(ParaxialDomainError):
        longitudinal_mismatch(
            crystal,
            np.array([wa]),
            np.array([wa]),
            q_ax=np.array([0.3 * k]),
        )


def test_whitened_nodes_shapes():
    pa, pb, w, jac, h = _whitened_nodes(6, 77.5e-6, 80e-6, 80e-6)
    assert pa.shape == (36,) and pb.shape == (36,) and w.shape == (36,)
    assert jac > 0
    assert h.shape == (2, 2)
    # tensor weights integrate the standardized gaussian: sum w_ij ~ pi
    assert np.sum(w) == pytest.approx(np.pi, rel=1e-12)


def test_joint_amplitude_order_convergence():
    grid = small_grid(n=4)
    kw = dict(
        crystal=CrystalSpec(),
        pump=PumpSpec(),
        collection=CollectionSpec(),
        grid=grid,
    )
    a8 = joint_amplitude(order=8, **kw)
    a16 = joint_amplitude(order=16, **kw)
    scale = np.abs(a16.values).max()
    assert np.abs(a8.values - a16.values).max() / scale < 1e-8


def test_joint_amplitude_exchange_symmetry():
    # swapping the two collection arms transposes the amplitude
    crystal = CrystalSpec()
    pump = PumpSpec()
    grid = FrequencyGrid.from_wavelength_bounds((683e-9, 915e-9), (683e-9, 915e-9), 6, 6)
    coll = CollectionSpec(angle_a_rad=np.deg2rad(1.28), angle_b_rad=np.deg2rad(1.05))
    swapped = CollectionSpec(angle_a_rad=np.deg2rad(1.05), angle_b_rad=np.deg2rad(1.28))
    a = joint_amplitude(crystal, pump, coll, grid, order=10)
    b = joint_amplitude(crystal, pump, swapped, grid, order=10)
    scale = np.abs(a.values).max()
    assert np.abs(a.values - b.values.T).max() / scale < 1e-6


def test_joint_amplitude_short_crystal_closed_form():
    # for L -> 0 the longitudinal kernel approaches 1 and the transverse
    # integral has a gaussian closed form; check the modulus against it
    crystal = CrystalSpec(length_m=1e-6)
    pump = PumpSpec()
    coll = CollectionSpec()
    grid = small_grid(n=3)
    amp = joint_amplitude(crystal, pump, coll, grid, order=12)

    wp2 = pump.waist_radius_m**2
    wa2 = coll.waist_a_m**2
    wb2 = coll.waist_b_m**2
    h = np.array(
        [
            [0.5 * (wp2 + wa2), 0.5 * wp2],
            [0.5 * wp2, 0.5 * (wp2 + wb2)],
        ]
    )
    c = 299792458.0
    oa, ob = grid.meshgrid()
    alpha = (oa / c) * np.sin(coll.angle_a_rad)
    beta = -(ob / c) * np.sin(coll.angle_b_rad)
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            m = 0.5 * np.array([wa2 * alpha[i, j], wb2 * beta[i, j]])
            v0 = np.linalg.solve(h, m)
            g0 = 0.25 * (wa2 * alpha[i, j] ** 2 + wb2 * beta[i, j] ** 2) - 0.5 * v0 @ h @ v0
            env = pump_envelope(pump, oa[i, j] + ob[i, j])
            expected = env * (2 * np.pi) ** 2 / np.linalg.det(h) * np.exp(-g0)
            assert abs(amp.values[i, j]) == pytest.approx(expected, rel=2e-4)


def test_joint_amplitude_central_mode_tracks_full():
    crystal = CrystalSpec()
    pump = PumpSpec()
    coll = CollectionSpec()
    grid = small_grid(half_nm=20.0, n=9)
    full = joint_intensity(joint_amplitude(crystal, pump, coll, grid, order=10))
    fast = joint_intensity(
        joint_amplitude(crystal, pump, coll, grid, mode="central")
    )
    a = full.values / full.values.max()
    b = fast.values / fast.values.max()
    corr = np.corrcoef(a.ravel(), b.ravel())[0, 1]
    assert corr > 0.97


def test_convergence_audit_raises():
    grid = small_grid(n=3)
    with pytest.raises(QuadratureConvergenceError) as info:
        joint_amplitude(
            CrystalSpec(),
            PumpSpec(),
            CollectionSpec(),
            grid,
            order=4,
            tolerance=1e-18,
        )
    assert info.value.value_n != info.value.value_2n


def test_workers_bitwise_invariant():
    grid = small_grid(half_nm=10.0, n=8)
    kw = dict(
        crystal=CrystalSpec(),
        pump=PumpSpec(),
        collection=CollectionSpec(),
        grid=grid,
        order=8,
    )
    a1 = joint_amplitude(workers=1, **kw)
    a3 = joint_amplitude(workers=3, **kw)
    assert np.array_equal(a1.values, a3.values)


def test_joint_intensity_and_validation():
    grid = small_grid(n=3)
    amp = joint_amplitude(CrystalSpec(), PumpSpec(), CollectionSpec(), grid, order=6)
    jsi = joint_intensity(amp)
    assert np.allclose(jsi.values, np.abs(amp.values) ** 2)
    with pytest.raises(NumericError):
        JointSpectrum(grid=grid, values=-np.ones(grid.shape))
    with pytest.raises(ConfigError):
        JointSpectrum(grid=grid, values=np.ones((2, grid.shape[1])))


def test_marginals_separable():
    n = 33
    grid = FrequencyGrid.from_wavelength_bounds((850e-9, 950e-9), (650e-9, 730e-9), n, n)
    oa, ob = grid.meshgrid()
    ca, cb = oa.mean(), ob.mean()
    sa = np.exp(-((oa - ca) ** 2) / (2 * (3e13) ** 2))
    sb = np.exp(-((ob - cb) ** 2) / (2 * (2e13) ** 2))
    spec = JointSpectrum(grid=grid, values=sa * sb)
    ma, mb = marginals(spec)
    ref_a = sa[:, 0] * np.trapezoid(sb[0], grid.omega_b)
    ref_b = sb[0] * np.trapezoid(sa[:, 0], grid.omega_a)
    assert ma == pytest.approx(ref_a, rel=1e-12)
    assert mb == pytest.approx(ref_b, rel=1e-12)


def test_spectrum_moments_gaussian():
    n = 65
    grid = FrequencyGrid.from_wavelength_bounds((850e-9, 950e-9), (650e-9, 730e-9), n, n)
    oa, ob = grid.meshgrid()
    ca = 2.10e15
    cb = 2.73e15
    sig_a = 2.5e13
    sig_b = 1.5e13
    vals = np.exp(
        -((oa - ca) ** 2) / (2 * sig_a**2) - ((ob - cb) ** 2) / (2 * sig_b**2)
    )
    spec = JointSpectrum(grid=grid, values=vals)
    ma, mb, ra, rb = spectrum_moments(spec)
    assert ma == pytest.approx(ca, rel=1e-6)
    assert mb == pytest.approx(cb, rel=1e-6)
    assert ra == pytest.approx(sig_a, rel=1e-3)
    assert rb == pytest.approx(sig_b, rel=1e-3)


def test_grid_validation():
    with pytest.raises(ConfigError):
        FrequencyGrid(omega_a=np.array([1.0]), omega_b=np.array([1.0, 2.0]))
    with pytest.raises(ConfigError):
        FrequencyGrid(
            omega_a=np.array([2.0, 1.0]), omega_b=np.array([1.0, 2.0])
        )
    with pytest.raises(ConfigError):
        FrequencyGrid(
            omega_a=np.array([1.0, 2.0, 4.0]), omega_b=np.array([1.0, 2.0])
        )
    with pytest.raises(ConfigError):
        FrequencyGrid(
            omega_a=np.array([0.0, 1.0]), omega_b=np.array([1.0, 2.0])
        )
