"""Noise benchmark: scenario validation, determinism, multiplex advantage."""
import numpy as np
import pytest

from pairspec import (
    BenchReport,
    BenchSpec,
    ConfigError,
    FrequencyGrid,
    JointSpectrum,
    NumericError,
    OverflowCountError,
    SweepReport,
    TWO_PI_C,
    advantage_sweep,
    compare,
    fourier_run,
    scanning_baseline,
)

W0 = TWO_PI_C / 780e-9
SIGMA_A = 0.04e15
SIGMA_B = 0.16e15


def gaussian_spectrum(n=56):
    omega_a = np.linspace(W0 - 4.2 * SIGMA_A, W0 + 4.2 * SIGMA_A, n)
    omega_b = np.linspace(W0 - 4.2 * SIGMA_B, W0 + 4.2 * SIGMA_B, n)
    grid = FrequencyGrid(omega_a=omega_a, omega_b=omega_b)
    aa, bb = np.meshgrid(omega_a, omega_b, indexing="ij")
    values = np.exp(-((aa - W0) ** 2) / (2 * SIGMA_A ** 2)
                    - ((bb - W0) ** 2) / (2 * SIGMA_B ** 2))
    return JointSpectrum(grid=grid, values=values)


def small_bench(**overrides):
    kwargs = dict(total_time_s=2000.0, pair_rate_scale_hz=1.0e7,
                  dark_coinc_rate_hz=5.0e5, spectral_pixels=(8, 8),
                  trials=4, rng_seed=7)
    kwargs.update(overrides)
    return BenchSpec(**kwargs)


class TestBenchSpecValidation:
    def test_defaults_are_dark_dominated(self):
        bench = BenchSpec()
        n_a, n_b = bench.spectral_pixels
        mean_signal = bench.pair_rate_scale_hz / (n_a * n_b)
        assert bench.dark_coinc_rate_hz >= 10.0 * mean_signal
        assert bench.trials >= 10

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ConfigError):
            small_bench(total_time_s=0.0)

    def test_rejects_bad_rates(self):
        with pytest.raises(ConfigError):
            small_bench(pair_rate_scale_hz=0.0)
        with pytest.raises(ConfigError):
            small_bench(dark_coinc_rate_hz=-1.0)

    def test_rejects_too_few_trials(self):
        with pytest.raises(ConfigError):
            small_bench(trials=0)

    def test_rejects_bad_pixel_grids(self):
        with pytest.raises(ConfigError):
            small_bench(spectral_pixels=(8,))
        with pytest.raises(ConfigError):
            small_bench(spectral_pixels=(8, 1))

    def test_rejects_oversized_seed(self):
        with pytest.raises(ConfigError):
            small_bench(rng_seed=2 ** 64)

    def test_rejects_bad_geometry_knobs(self):
        with pytest.raises(ConfigError):
            small_bench(bandwidth_sigmas=0.0)
        with pytest.raises(ConfigError):
            small_bench(map_bins_per_pixel=-0.5)


class TestDesignGuards:
    def test_pixel_grid_must_fit_inside_spectrum(self):
        with pytest.raises(ConfigError, match="beyond the spectrum grid"):
            scanning_baseline(gaussian_spectrum(),
                              small_bench(bandwidth_sigmas=100.0))

    def test_coarse_spectrum_grid_rejected(self):
        # a 24-point grid's frequency comb has a delay period shorter than
        # the 16x16 scan's reach, so the quadrature would sample echoes
        with pytest.raises(ConfigError, match="too coarse"):
            fourier_run(gaussian_spectrum(24),
                        small_bench(spectral_pixels=(16, 16)))

    def test_overflowing_pixel_counts_rejected(self):
        with pytest.raises(OverflowCountError):
            scanning_baseline(gaussian_spectrum(),
                              small_bench(total_time_s=1e40))


class TestScanningBaseline:
    def test_shapes_and_positivity(self):
        est = scanning_baseline(gaussian_spectrum(), small_bench())
        assert est.values.shape == (8, 8)
        assert est.sigma.shape == (8, 8)
        assert est.omega_a.shape == (8,)
        assert est.omega_b.shape == (8,)
        assert np.all(est.values >= 0.0)
        assert np.all(est.sigma > 0.0)

    def test_equal_time_split(self):
        bench = small_bench()
        est = scanning_baseline(gaussian_spectrum(), bench)
        n_pix = est.values.size
        assert est.meta["t_pix_s"] * n_pix == pytest.approx(
            bench.total_time_s, rel=1e-9)

    def test_deterministic_rerun(self):
        spectrum = gaussian_spectrum()
        first = scanning_baseline(spectrum, small_bench())
        again = scanning_baseline(spectrum, small_bench())
        assert np.array_equal(first.values, again.values)
        assert np.array_equal(first.sigma, again.sigma)

    def test_seed_changes_counts(self):
        spectrum = gaussian_spectrum()
        a = scanning_baseline(spectrum, small_bench(rng_seed=1))
        b = scanning_baseline(spectrum, small_bench(rng_seed=2))
        assert not np.array_equal(a.values, b.values)

    def test_unbiased_without_dark(self):
        # dark = 0 leaves the zero-clip inactive, so the mean rate over
        # many trials must approach rate * pixel fraction
        spectrum = gaussian_spectrum()
        bench = small_bench(dark_coinc_rate_hz=0.0, trials=1)
        truth = compare(spectrum, bench).meta["truth"]
        stack = np.stack([
            scanning_baseline(spectrum, small_bench(
                dark_coinc_rate_hz=0.0, rng_seed=seed)).values
            for seed in range(40)])
        expected = bench.pair_rate_scale_hz * truth
        se = stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
        pixel_avg_z = np.mean(
            (stack.mean(axis=0) - expected) / np.clip(se, 1e-30, None))
        assert abs(pixel_avg_z) < 3.0

    def test_low_expected_counts_flagged(self):
        est = scanning_baseline(
            gaussian_spectrum(), small_bench(total_time_s=1e-6))
        assert est.meta["low_expected_counts"]


class TestFourierRun:
    def test_shapes_and_positivity(self):
        est = fourier_run(gaussian_spectrum(), small_bench())
        assert est.values.shape == (8, 8)
        assert np.all(est.values >= 0.0)
        assert np.all(est.sigma > 0.0)
        assert est.meta["noise_power"] > 0.0

    def test_equal_time_split(self):
        bench = small_bench()
        est = fourier_run(gaussian_spectrum(), bench)
        n_u, n_v = est.meta["plan_shape"]
        assert est.meta["dwell_s"] * n_u * n_v == pytest.approx(
            bench.total_time_s, rel=1e-9)

    def test_deterministic_rerun(self):
        spectrum = gaussian_spectrum()
        first = fourier_run(spectrum, small_bench())
        again = fourier_run(spectrum, small_bench())
        assert np.array_equal(first.values, again.values)

    def test_seed_changes_counts(self):
        spectrum = gaussian_spectrum()
        a = fourier_run(spectrum, small_bench(rng_seed=1))
        b = fourier_run(spectrum, small_bench(rng_seed=2))
        assert not np.array_equal(a.values, b.values)

    def test_noise_free_estimate_matches_truth(self):
        # with a huge rate and no dark counts the normalized Fourier
        # estimate is limited only by the matched-resolution floor of its
        # scan plan, a few percent of the truth power at this pixelation
        spectrum = gaussian_spectrum()
        bench = small_bench(pair_rate_scale_hz=1e12, dark_coinc_rate_hz=0.0,
                            spectral_pixels=(16, 16), trials=1)
        report = compare(spectrum, bench)
        truth = report.meta["truth"]
        assert np.median(report.mse_fourier) < 0.05 * np.mean(truth ** 2)
        estimate = fourier_run(spectrum, bench).values
        peak = np.unravel_index(np.argmax(estimate), truth.shape)
        ref = np.unravel_index(np.argmax(truth), truth.shape)
        # the symmetric peak straddles two pixels on this even grid
        assert abs(peak[0] - ref[0]) <= 1 and abs(peak[1] - ref[1]) <= 1


class TestCompare:
    def test_report_structure(self):
        bench = small_bench()
        report = compare(gaussian_spectrum(), bench)
        assert isinstance(report, BenchReport)
        assert report.mse_fourier.shape == (bench.trials,)
        assert report.mse_scanning.shape == (bench.trials,)
        assert report.advantage_ratio.shape == (bench.trials,)
        assert 0.0 <= report.fourier_win_fraction <= 1.0
        assert report.snr_fourier.shape == bench.spectral_pixels
        assert report.snr_scanning.shape == bench.spectral_pixels
        assert report.flags["insufficient_statistics"]  # trials=4 < 10

    def test_regime_classification(self):
        # dark/mean-signal = dark * N_pix / rate: 12.8 at 16x16, 3.2 at 8x8
        spectrum = gaussian_spectrum()
        dark = compare(spectrum, small_bench(
            trials=1, spectral_pixels=(16, 16)))
        assert dark.regime == "dark-dominated"
        assert dark.dark_to_mean_signal >= 10.0
        quiet = compare(spectrum, small_bench(trials=1))
        assert quiet.regime == "signal-dominated"
        assert not quiet.advantage_claimed

    def test_deterministic_rerun(self):
        spectrum = gaussian_spectrum()
        first = compare(spectrum, small_bench())
        again = compare(spectrum, small_bench())
        assert np.array_equal(first.mse_fourier, again.mse_fourier)
        assert np.array_equal(first.mse_scanning, again.mse_scanning)

    def test_zero_count_trials_score_infinite_error(self):
        # starve both instruments so every estimate sums to zero
        report = compare(gaussian_spectrum(), small_bench(
            pair_rate_scale_hz=1e-9, dark_coinc_rate_hz=0.0, trials=2))
        assert np.all(np.isinf(report.mse_fourier))
        assert np.all(np.isinf(report.mse_scanning))

    def test_summary_lines(self):
        report = compare(gaussian_spectrum(), small_bench())
        text = "\n".join(report.summary_lines())
        assert "pixels 8x8" in text
        assert "regime=signal-dominated" in text
        assert "flag insufficient_statistics=true" in text

    def test_normalized_zero_raises(self):
        with pytest.raises(NumericError):
            from pairspec.bench import _normalized
            _normalized(np.zeros((3, 3)))


class TestAdvantage:
    def test_fourier_wins_when_dark_dominated(self):
        # the default scenario at its headline pixelation: every trial's
        # Fourier error must undercut the scanning error
        report = compare(gaussian_spectrum(128), BenchSpec(trials=5))
        assert report.regime == "dark-dominated"
        assert report.fourier_win_fraction == 1.0
        assert np.all(report.advantage_ratio > 1.0)
        assert report.advantage_claimed

    def test_sweep_ratio_monotone(self):
        spectrum = gaussian_spectrum(128)
        sweep = advantage_sweep(spectrum, BenchSpec(trials=3))
        assert isinstance(sweep, SweepReport)
        assert len(sweep.reports) == 3
        medians = [np.median(r.advantage_ratio) for r in sweep.reports]
        assert medians[0] < medians[1] < medians[2]
        assert sweep.monotone_fraction == 1.0
        text = "\n".join(sweep.summary_lines())
        assert "monotone_ratio_fraction=1.000" in text

    def test_sweep_rejects_unordered_counts(self):
        spectrum = gaussian_spectrum()
        with pytest.raises(ConfigError):
            advantage_sweep(spectrum, small_bench(), pixel_counts=(32, 16))
        with pytest.raises(ConfigError):
            advantage_sweep(spectrum, small_bench(), pixel_counts=(16, 16))
