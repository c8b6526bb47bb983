"""Transform identities, term unmixing, resampling and cross-sections."""
import numpy as np
import pytest

from pairspec import (
    ConfigError,
    DetectionSpec,
    FrequencyGrid,
    Interferogram,
    JointSpectrum,
    ScanPlan,
    TWO_PI_C,
    WavelengthRangeError,
    cross_section,
    dft2,
    extract_terms,
    isolate_pair_interference,
    joint_in_frequency,
    joint_in_wavelength,
    plan_scan,
    sample_island,
    synthesize,
)
from pairspec.reconstruction import _line_readout

W0 = TWO_PI_C / 780e-9
SIGMA_A = 0.04e15
SIGMA_B = 0.16e15


def gaussian_spectrum(n=64, span_sigmas=4.2):
    grid = FrequencyGrid(
        np.linspace(W0 - span_sigmas * SIGMA_A, W0 + span_sigmas * SIGMA_A, n),
        np.linspace(W0 - span_sigmas * SIGMA_B, W0 + span_sigmas * SIGMA_B, n),
    )
    a, b = grid.meshgrid()
    values = np.exp(-((a - W0) ** 2) / (2 * SIGMA_A ** 2)
                    - ((b - W0) ** 2) / (2 * SIGMA_B ** 2))
    return JointSpectrum(grid=grid, values=values)


def truth(omega_a, omega_b):
    return np.exp(-((omega_a - W0) ** 2) / (2 * SIGMA_A ** 2)
                  - ((omega_b - W0) ** 2) / (2 * SIGMA_B ** 2))


def sampled_run(seed=5, n=48):
    spec = gaussian_spectrum(n=n)
    plan = plan_scan(W0, W0, 6 * SIGMA_A, 6 * SIGMA_B, oversampling=1.5)
    det = DetectionSpec(dwell_s=1.0, pair_rate_scale_hz=2000.0,
                        dark_rate_hz=5.0, rng_seed=seed)
    return synthesize(spec, plan, det), spec


def expected_run(n=64):
    spec = gaussian_spectrum(n=n)
    plan = plan_scan(W0, W0, 6 * SIGMA_A, 6 * SIGMA_B, oversampling=1.5)
    det = DetectionSpec(dwell_s=1.0, pair_rate_scale_hz=3000.0,
                        dark_rate_hz=5.0)
    return synthesize(spec, plan, det, kind="expected"), spec


class TestTransformIdentities:
    def test_zero_bin_equals_total_count(self):
        ig, _ = sampled_run()
        fmap = dft2(ig, window="none", detrend=False)
        i, j = fmap.center_index
        total = ig.values.sum()
        assert fmap.values[i, j].real == pytest.approx(total, rel=1e-12)
        assert abs(fmap.values[i, j].imag) <= 1e-12 * total

    def test_hermitian_symmetry(self):
        ig, _ = sampled_run()
        fmap = dft2(ig, window="none", detrend=False)
        band = fmap.values[1:, 1:]
        mirrored = np.conj(band[::-1, ::-1])
        scale = np.abs(fmap.values).max()
        assert np.max(np.abs(band - mirrored)) <= 1e-12 * scale

    def test_parseval(self):
        ig, _ = sampled_run()
        for window, detrend in (("none", False), ("hann", True)):
            fmap = dft2(ig, window=window, detrend=detrend)
            x = ig.values - (ig.values.mean() if detrend else 0.0)
            xw = x * np.outer(fmap.window_u, fmap.window_v)
            lhs = np.sum(np.abs(fmap.values) ** 2)
            rhs = x.size * np.sum(xw ** 2)
            assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_detrended_zero_bin_vanishes(self):
        ig, _ = sampled_run()
        fmap = dft2(ig, window="none", detrend=True)
        i, j = fmap.center_index
        assert abs(fmap.values[i, j]) <= 1e-9 * ig.values.sum()

    def test_unknown_window_rejected(self):
        ig, _ = sampled_run()
        with pytest.raises(ConfigError):
            dft2(ig, window="hamming")


class TestTermExtraction:
    def test_masks_tile_plane(self):
        ig, _ = sampled_run()
        terms = extract_terms(dft2(ig))
        assert terms.masks.tiles()

    def test_dc_weight_is_total_count(self):
        ig, _ = sampled_run()
        terms = extract_terms(dft2(ig, window="none", detrend=False))
        assert terms.dc_weight() == pytest.approx(ig.values.sum(), rel=1e-12)

    def test_joint_values_live_on_pp_mask_only(self):
        ig, _ = sampled_run()
        terms = extract_terms(dft2(ig, window="none", detrend=False))
        jv = terms.joint_values()
        assert np.all(jv[~terms.masks.joint_pp] == 0.0)
        assert jv.max() > 0

    def test_marginals_need_unrotated_scan(self):
        ig, _ = sampled_run()
        terms = extract_terms(dft2(ig))
        with pytest.raises(ConfigError, match="unrotated"):
            terms.marginal_a()

    def test_marginals_on_unrotated_dense_scan(self):
        spec = gaussian_spectrum(n=96)
        plan = ScanPlan(theta_rad=0.0, step_u_s=1.0e-15, step_v_s=1.0e-15,
                        n_u=256, n_v=256)
        det = DetectionSpec(dwell_s=1.0, pair_rate_scale_hz=1000.0)
        ig = synthesize(spec, plan, det, kind="expected")
        terms = extract_terms(dft2(ig, window="none", detrend=False))

        for profile, axis, sigma in (
                (terms.marginal_a(), terms.fmap.omega_u, SIGMA_A),
                (terms.marginal_b(), terms.fmap.omega_v, SIGMA_B)):
            band = np.abs(axis - W0) <= 4.0 * sigma
            got = profile[band]
            want = np.exp(-((axis[band] - W0) ** 2) / (2 * sigma ** 2))
            alpha = float(np.dot(got, want) / np.dot(got, got))
            rms = np.sqrt(np.mean((alpha * got - want) ** 2)
                          / np.mean(want ** 2))
            assert rms < 0.02


class TestPairIsolation:
    def test_background_suppression_preserves_island(self):
        ig, _ = expected_run()
        raw = dft2(ig, window="none", detrend=False)
        res = isolate_pair_interference(ig)
        iso = dft2(res, window="none", detrend=False)

        i0, j0 = raw.center_index
        assert abs(iso.values[i0, j0]) < 1e-3 * abs(raw.values[i0, j0])

        # the folded single-arm lines collapse by orders of magnitude
        uu, vv = np.meshgrid(raw.omega_u, raw.omega_v, indexing="ij")
        line = (np.abs(np.abs(uu) - W0 * np.cos(np.pi / 4)) < 0.2e15) \
            & (np.abs(np.abs(vv) - 0.43e15) < 0.1e15)
        assert np.abs(iso.values[line]).max() \
            < 3e-3 * np.abs(raw.values[line]).max()

        # while the joint island survives unchanged
        peak_raw = sample_island(raw, W0, W0)
        peak_iso = sample_island(iso, W0, W0)
        assert peak_iso == pytest.approx(peak_raw, rel=1e-2)

    def test_round_trip_on_matched_bins(self):
        ig, spec = expected_run()
        fmap = dft2(isolate_pair_interference(ig), window="none",
                    detrend=False)
        ct, st = np.cos(fmap.theta_rad), np.sin(fmap.theta_rad)
        uu, vv = np.meshgrid(fmap.omega_u, fmap.omega_v, indexing="ij")
        wa = uu * ct - vv * st
        wb = uu * st + vv * ct
        box = (np.abs(wa - W0) <= 4.2 * SIGMA_A) \
            & (np.abs(wb - W0) <= 4.2 * SIGMA_B)
        est = 4.0 * np.abs(fmap.values)[box]
        want = truth(wa[box], wb[box])
        alpha = float(np.dot(est, want) / np.dot(est, est))
        rel = np.sqrt(np.mean((alpha * est - want) ** 2)
                      / np.mean(want ** 2))
        assert rel < 1e-3

    def test_requires_plan_metadata(self):
        ig, _ = sampled_run()
        bare_plan = ScanPlan(
            theta_rad=ig.plan.theta_rad, step_u_s=ig.plan.step_u_s,
            step_v_s=ig.plan.step_v_s, n_u=ig.plan.n_u, n_v=ig.plan.n_v)
        bare = Interferogram(plan=bare_plan, values=ig.values,
                             kind="sampled", dwell_s=ig.dwell_s)
        with pytest.raises(ConfigError, match="metadata"):
            isolate_pair_interference(bare)

    def test_knot_spacing_validation(self):
        ig, _ = sampled_run()
        with pytest.raises(ConfigError):
            isolate_pair_interference(ig, knot_spacing_s=-1.0)
        with pytest.raises(ConfigError, match="knot spacing"):
            isolate_pair_interference(ig, knot_spacing_s=1e-18)


class TestResampling:
    def test_sample_island_peaks_at_centre(self):
        ig, _ = expected_run()
        fmap = dft2(isolate_pair_interference(ig), window="none",
                    detrend=False)
        centre = sample_island(fmap, W0, W0)
        off = sample_island(fmap, W0 + 2 * SIGMA_A, W0)
        assert centre > off > 0

    def test_joint_in_frequency_matches_truth(self):
        ig, _ = expected_run()
        fmap = dft2(isolate_pair_interference(ig), window="none",
                    detrend=False)
        wa = np.linspace(W0 - 3 * SIGMA_A, W0 + 3 * SIGMA_A, 41)
        wb = np.linspace(W0 - 3 * SIGMA_B, W0 + 3 * SIGMA_B, 41)
        got = joint_in_frequency(fmap, wa, wb, normalize=True)
        want = truth(wa[:, None], wb[None, :])
        # bilinear read-out on a ~6-bin-per-sigma map limits the accuracy
        assert np.sqrt(np.mean((got - want) ** 2)) < 5e-3

    def test_wavelength_jacobian(self):
        ig, _ = expected_run()
        fmap = dft2(isolate_pair_interference(ig), window="none",
                    detrend=False)
        lam_a = np.linspace(770e-9, 790e-9, 11)
        lam_b = np.linspace(760e-9, 800e-9, 11)
        plain = joint_in_wavelength(fmap, lam_a, lam_b, jacobian=False,
                                    normalize=False)
        dens = joint_in_wavelength(fmap, lam_a, lam_b, jacobian=True,
                                   normalize=False)
        jac = np.outer(TWO_PI_C / lam_a ** 2, TWO_PI_C / lam_b ** 2)
        assert np.allclose(dens.values, plain.values * jac, rtol=1e-12)

    def test_wavelength_normalization(self):
        ig, _ = expected_run()
        fmap = dft2(isolate_pair_interference(ig), window="none",
                    detrend=False)
        spec = joint_in_wavelength(fmap, np.linspace(770e-9, 790e-9, 11),
                                   np.linspace(760e-9, 800e-9, 11))
        assert spec.values.max() == pytest.approx(1.0)
        assert spec.meta["scale"] > 0

    def test_out_of_plane_rejected(self):
        ig, _ = expected_run()
        fmap = dft2(ig)
        with pytest.raises(WavelengthRangeError):
            sample_island(fmap, 10 * W0, W0)
        with pytest.raises(WavelengthRangeError):
            joint_in_wavelength(fmap, np.linspace(100e-9, 110e-9, 5),
                                np.linspace(770e-9, 790e-9, 5))


class TestCrossSection:
    def test_pinned_line(self):
        ig, _ = sampled_run()
        fmap = dft2(ig, window="none", detrend=False)
        wa = np.linspace(W0 - 2 * SIGMA_A, W0 + 2 * SIGMA_A, 31)
        cut = cross_section(fmap, kind="sum", const_omega=2 * W0, omega_a=wa)
        assert cut.kind == "sum"
        assert np.array_equal(cut.omega_a, wa)
        assert np.allclose(cut.lambda_a_m, TWO_PI_C / wa)
        assert cut.values.shape == wa.shape
        assert np.all(cut.sigma >= 0)
        assert cut.values.max() > 0

    def test_auto_line_covers_island_neighbourhood(self):
        ig, _ = sampled_run()
        fmap = dft2(ig, window="none", detrend=False)
        for kind in ("sum", "difference"):
            cut = cross_section(fmap, kind=kind, n_points=101)
            span = cut.omega_a.max() - cut.omega_a.min()
            assert span < 1.2e15
            assert span > 0.3e15
            assert abs(cut.meta["peak_omega_a"] - W0) < 0.1e15

    def test_line_readout_matches_map_bins(self):
        ig, _ = sampled_run()
        fmap = dft2(ig, window="none", detrend=False)
        ct, st = np.cos(fmap.theta_rad), np.sin(fmap.theta_rad)
        i0, j0 = fmap.center_index
        # bins on the ++ island, mapped back to per-arm frequencies
        rows = [i0 + 171, i0 + 165, i0 + 176]
        cols = [j0, j0 + 3, j0 - 4]
        for i, j in zip(rows, cols):
            wu, wv = fmap.omega_u[i], fmap.omega_v[j]
            wa, wb = wu * ct - wv * st, wu * st + wv * ct
            values, sigma = _line_readout(
                fmap, np.array([wa]), np.array([wb]))
            assert values[0] == pytest.approx(
                4.0 * abs(fmap.values[i, j]), rel=1e-9)
            assert sigma[0] > 0

    def test_sigma_scale_against_monte_carlo(self):
        spec = gaussian_spectrum(n=40)
        plan = plan_scan(W0, W0, 6 * SIGMA_A, 6 * SIGMA_B, oversampling=1.5,
                         resolution_fraction=4)
        wa = np.array([W0, W0 + SIGMA_A])
        wb = 2 * W0 - wa
        vals = []
        sigmas = []
        for seed in range(40):
            det = DetectionSpec(dwell_s=1.0, pair_rate_scale_hz=2000.0,
                                dark_rate_hz=10.0, rng_seed=seed)
            fmap = dft2(synthesize(spec, plan, det), window="none",
                        detrend=False)
            v, s = _line_readout(fmap, wa, wb)
            vals.append(v)
            sigmas.append(s)
        vals = np.array(vals)
        sigmas = np.array(sigmas)
        ratio = vals.std(axis=0) / sigmas.mean(axis=0)
        # reported sigma should match the observed scatter within MC error
        assert np.all(ratio > 0.6) and np.all(ratio < 1.5)

    def test_kind_validation(self):
        ig, _ = sampled_run()
        fmap = dft2(ig)
        with pytest.raises(ConfigError):
            cross_section(fmap, kind="diag")
        with pytest.raises(ConfigError):
            cross_section(fmap, n_points=1)
