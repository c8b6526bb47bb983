"""One flat key=value configuration for every pipeline command.

Every tunable lives in a single documented schema below: key names carry
their units, the same table generates the default file, drives parsing,
validates types, and defines the canonical digest text, so documentation
and behaviour cannot drift apart. A config file must set every key
exactly once — partial files are rejected naming the first missing key —
which keeps run records complete and reruns reproducible. Unknown and
duplicate keys are rejected by name as well.

The digest is the SHA-256 of the sorted canonical ``key=value`` lines of
the effective configuration. Commands stamp it into every output file,
so any artifact can be traced to the exact configuration that made it.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from .bench import BenchSpec
from .crystal import CrystalSpec
from .errors import ConfigError
from .interferometer import DetectionSpec, ScanPlan, plan_scan
from .spdc import (
    TWO_PI_C,
    CollectionSpec,
    FrequencyGrid,
    JointSpectrum,
    PumpSpec,
    spectrum_moments,
    spectrum_second_moments,
)


@dataclass(frozen=True)
class _Key:
    name: str
    default: Any
    kind: str  # "float" | "int" | "str" | "bool"
    doc: str


_SCHEMA: Tuple[_Key, ...] = (
    # nonlinear crystal
    _Key("crystal_length_mm", 1.0, "float",
         "crystal thickness along the pump"),
    _Key("crystal_cut_angle_deg", 29.7, "float",
         "optic-axis angle of the cut"),
    _Key("crystal_sellmeier_set", "bbo-kato-1986", "str",
         "dispersion data set for the crystal"),
    # pump pulse
    _Key("pump_center_wavelength_nm", 390.0, "float",
         "pump centre wavelength"),
    _Key("pump_duration_fwhm_fs", 100.0, "float",
         "pump intensity FWHM duration"),
    _Key("pump_waist_radius_um", 77.5, "float",
         "pump beam waist radius in the crystal"),
    _Key("pump_average_power_mw", 20.0, "float",
         "average pump power (provenance only)"),
    _Key("pump_rep_rate_mhz", 80.0, "float",
         "pulse repetition rate (provenance only)"),
    # collection optics
    _Key("collection_angle_a_deg", 1.28, "float",
         "external collection angle, arm A"),
    _Key("collection_angle_b_deg", 1.05, "float",
         "external collection angle, arm B"),
    _Key("collection_waist_a_um", 80.0, "float",
         "collected mode waist in the crystal, arm A"),
    _Key("collection_waist_b_um", 80.0, "float",
         "collected mode waist in the crystal, arm B"),
    # spectral grid: simulation output and wavelength resampling axes
    _Key("grid_wavelength_a_min_nm", 840.0, "float",
         "shortest wavelength of the arm-A axis"),
    _Key("grid_wavelength_a_max_nm", 995.0, "float",
         "longest wavelength of the arm-A axis"),
    _Key("grid_points_a", 128, "int", "points on the arm-A axis"),
    _Key("grid_wavelength_b_min_nm", 630.0, "float",
         "shortest wavelength of the arm-B axis"),
    _Key("grid_wavelength_b_max_nm", 744.0, "float",
         "longest wavelength of the arm-B axis"),
    _Key("grid_points_b", 128, "int", "points on the arm-B axis"),
    # quadrature for the source model
    _Key("quadrature_order", 12, "int",
         "Gauss-Hermite order per transverse dimension"),
    _Key("quadrature_mode", "gauss-hermite", "str",
         "gauss-hermite (full) or central (fast preview)"),
    _Key("quadrature_tolerance", 1e-3, "float",
         "relative agreement required between orders N and 2N"),
    _Key("worker_count", 0, "int",
         "threads for the source model; 0 = all available cores"),
    # delay scan
    _Key("scan_points_u", 800, "int", "lattice points on the fast axis"),
    _Key("scan_points_v", 40, "int", "lattice points on the slow axis"),
    _Key("scan_step_u_fs", 0.57, "float", "fast-axis delay step"),
    _Key("scan_step_v_fs", 2.0, "float", "slow-axis delay step"),
    _Key("scan_max_delay_fs", 250.0, "float",
         "delay-stage range limit per arm"),
    _Key("scan_oversampling", 1.5, "float",
         "margin over the fringe Nyquist step"),
    # detection
    _Key("detection_dwell_s", 3.0, "float",
         "counting time per lattice point"),
    _Key("detection_pair_rate_hz", 1000.0, "float",
         "coincidence rate at zero delay"),
    _Key("detection_dark_rate_hz", 0.0, "float",
         "background coincidence rate"),
    _Key("detection_visibility", 1.0, "float",
         "interference visibility per arm"),
    _Key("rng_seed", 0, "int", "64-bit seed for all sampled counts"),
    _Key("synthesize_kind", "sampled", "str",
         "sampled (Poisson counts) or expected (noise-free)"),
    # reconstruction
    _Key("recon_isolate", True, "bool",
         "regress single-arm interference out before the transform"),
    _Key("recon_window", "none", "str",
         "taper for the transform: none or hann"),
    _Key("recon_detrend", False, "bool",
         "subtract the mean count before the transform"),
    _Key("cross_section_kind", "sum", "str",
         "cut along constant sum or difference frequency"),
    _Key("cross_section_points", 201, "int",
         "sample points along the cut"),
    # noise benchmark
    _Key("bench_total_time_s", 2000.0, "float",
         "total observation time per instrument"),
    _Key("bench_pair_rate_scale_hz", 1.0e7, "float",
         "total pair rate of the benchmark source"),
    _Key("bench_dark_coinc_rate_hz", 5.0e5, "float",
         "background coincidence rate during the benchmark"),
    _Key("bench_pixels_a", 64, "int", "spectral pixels, arm A"),
    _Key("bench_pixels_b", 64, "int", "spectral pixels, arm B"),
    _Key("bench_trials", 100, "int", "Monte-Carlo trials"),
    _Key("bench_sigma_a_rad_per_s", 4.0e13, "float",
         "rms width of the benchmark source, arm A"),
    _Key("bench_sigma_b_rad_per_s", 1.6e14, "float",
         "rms width of the benchmark source, arm B"),
    _Key("bench_grid_points", 128, "int",
         "frequency samples per axis of the benchmark source"),
    _Key("bench_grid_span_sigmas", 8.4, "float",
         "full span of the benchmark grid in rms widths"),
    # output
    _Key("output_dir", ".", "str", "directory for all output files"),
)

_BY_NAME: Dict[str, _Key] = {key.name: key for key in _SCHEMA}


def _canonical(key: _Key, value) -> str:
    if key.kind == "float":
        # repr of a double is the shortest text that parses back exactly
        return repr(float(value))
    if key.kind == "bool":
        return "true" if value else "false"
    return str(value)


def _parse_value(key: _Key, token: str):
    token = token.strip()
    try:
        if key.kind == "float":
            value = float(token)
            if not np.isfinite(value):
                raise ValueError("not finite")
            return value
        if key.kind == "int":
            return int(token, 10)
        if key.kind == "bool":
            if token == "true":
                return True
            if token == "false":
                return False
            raise ValueError("expected true or false")
        return token
    except ValueError as exc:
        raise ConfigError(
            f"config key {key.name!r}: cannot parse {token!r} "
            f"as {key.kind} ({exc})") from None


@dataclass(frozen=True)
class SourceConfig:
    """The effective configuration: every schema key resolved to a value."""

    values: Dict[str, Any]

    def __getitem__(self, name: str):
        if name not in _BY_NAME:
            raise ConfigError(f"unknown config key {name!r}")
        return self.values[name]

    @property
    def digest(self) -> str:
        """SHA-256 over the sorted canonical key=value lines."""
        lines = [f"{name}={_canonical(_BY_NAME[name], self.values[name])}"
                 for name in sorted(self.values)]
        payload = ("\n".join(lines) + "\n").encode("ascii")
        return hashlib.sha256(payload).hexdigest()

    # builders for the domain objects ------------------------------------

    def crystal(self) -> CrystalSpec:
        return CrystalSpec(
            length_m=self["crystal_length_mm"] * 1e-3,
            cut_angle_rad=np.deg2rad(self["crystal_cut_angle_deg"]),
            sellmeier_set=self["crystal_sellmeier_set"])

    def pump(self) -> PumpSpec:
        return PumpSpec(
            center_wavelength_m=self["pump_center_wavelength_nm"] * 1e-9,
            duration_fwhm_s=self["pump_duration_fwhm_fs"] * 1e-15,
            waist_radius_m=self["pump_waist_radius_um"] * 1e-6,
            average_power_w=self["pump_average_power_mw"] * 1e-3,
            rep_rate_hz=self["pump_rep_rate_mhz"] * 1e6)

    def collection(self) -> CollectionSpec:
        return CollectionSpec(
            angle_a_rad=np.deg2rad(self["collection_angle_a_deg"]),
            angle_b_rad=np.deg2rad(self["collection_angle_b_deg"]),
            waist_a_m=self["collection_waist_a_um"] * 1e-6,
            waist_b_m=self["collection_waist_b_um"] * 1e-6)

    def _omega_axis(self, arm: str) -> np.ndarray:
        lam_min = self[f"grid_wavelength_{arm}_min_nm"] * 1e-9
        lam_max = self[f"grid_wavelength_{arm}_max_nm"] * 1e-9
        points = self[f"grid_points_{arm}"]
        if not 0 < lam_min < lam_max:
            raise ConfigError(
                f"grid wavelengths for arm {arm} must satisfy "
                f"0 < min < max")
        if points < 2:
            raise ConfigError(f"grid_points_{arm} must be >= 2")
        return np.linspace(TWO_PI_C / lam_max, TWO_PI_C / lam_min, points)

    def frequency_grid(self) -> FrequencyGrid:
        """Uniform angular-frequency grid between the wavelength limits."""
        return FrequencyGrid(omega_a=self._omega_axis("a"),
                             omega_b=self._omega_axis("b"))

    def wavelength_axes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Display axes for resampled spectra, ascending in wavelength."""
        lam_a = np.linspace(self["grid_wavelength_a_min_nm"],
                            self["grid_wavelength_a_max_nm"],
                            self["grid_points_a"]) * 1e-9
        lam_b = np.linspace(self["grid_wavelength_b_min_nm"],
                            self["grid_wavelength_b_max_nm"],
                            self["grid_points_b"]) * 1e-9
        return lam_a, lam_b

    def detection(self) -> DetectionSpec:
        return DetectionSpec(
            dwell_s=self["detection_dwell_s"],
            pair_rate_scale_hz=self["detection_pair_rate_hz"],
            dark_rate_hz=self["detection_dark_rate_hz"],
            visibility=self["detection_visibility"],
            rng_seed=self["rng_seed"])

    def scan_plan(self, spectrum: JointSpectrum,
                  rms_multiplier: float = 8.5) -> ScanPlan:
        """The configured lattice, centred on the spectrum's moments."""
        center_a, center_b, rms_a, rms_b = spectrum_moments(spectrum)
        var_a, var_b, cov = spectrum_second_moments(spectrum)
        return plan_scan(
            center_a, center_b,
            rms_multiplier * rms_a, rms_multiplier * rms_b,
            oversampling=self["scan_oversampling"],
            max_delay_s=self["scan_max_delay_fs"] * 1e-15,
            step_u_s=self["scan_step_u_fs"] * 1e-15,
            step_v_s=self["scan_step_v_fs"] * 1e-15,
            n_u=self["scan_points_u"],
            n_v=self["scan_points_v"],
            source_var_a=var_a,
            source_var_b=var_b,
            source_cov=cov)

    def bench(self) -> BenchSpec:
        return BenchSpec(
            total_time_s=self["bench_total_time_s"],
            pair_rate_scale_hz=self["bench_pair_rate_scale_hz"],
            dark_coinc_rate_hz=self["bench_dark_coinc_rate_hz"],
            spectral_pixels=(self["bench_pixels_a"],
                             self["bench_pixels_b"]),
            trials=self["bench_trials"],
            rng_seed=self["rng_seed"])

    def bench_spectrum(self) -> JointSpectrum:
        """Separable-Gaussian benchmark source around degeneracy."""
        center = 0.5 * self.pump().center_omega
        half = 0.5 * self["bench_grid_span_sigmas"]
        points = self["bench_grid_points"]
        if points < 2:
            raise ConfigError("bench_grid_points must be >= 2")
        sig_a = self["bench_sigma_a_rad_per_s"]
        sig_b = self["bench_sigma_b_rad_per_s"]
        if sig_a <= 0 or sig_b <= 0 or half <= 0:
            raise ConfigError(
                "benchmark source widths and span must be positive")
        omega_a = np.linspace(center - half * sig_a,
                              center + half * sig_a, points)
        omega_b = np.linspace(center - half * sig_b,
                              center + half * sig_b, points)
        aa, bb = np.meshgrid(omega_a, omega_b, indexing="ij")
        values = np.exp(-((aa - center) ** 2) / (2 * sig_a ** 2)
                        - ((bb - center) ** 2) / (2 * sig_b ** 2))
        return JointSpectrum(
            grid=FrequencyGrid(omega_a=omega_a, omega_b=omega_b),
            values=values)

    def workers(self) -> int:
        count = self["worker_count"]
        if count < 0:
            raise ConfigError("worker_count must be >= 0")
        return count if count > 0 else (os.cpu_count() or 1)


def default_config() -> SourceConfig:
    return SourceConfig(values={key.name: key.default for key in _SCHEMA})


def dump_default_text() -> str:
    """The complete default config file, documented, one key per line."""
    lines = [
        "# pairspec configuration: every key is required, units are in",
        "# the key names, values are key = value on one line each.",
    ]
    for key in _SCHEMA:
        lines.append(f"# {key.doc}")
        lines.append(f"{key.name} = {_canonical(key, key.default)}")
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> SourceConfig:
    """Parse config text; every schema key must appear exactly once."""
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(
                f"config line {lineno} is not key = value: {raw!r}")
        name, _, token = line.partition("=")
        name = name.strip()
        if name not in _BY_NAME:
            raise ConfigError(f"unknown config key {name!r} "
                              f"(line {lineno})")
        if name in values:
            raise ConfigError(f"duplicate config key {name!r} "
                              f"(line {lineno})")
        values[name] = _parse_value(_BY_NAME[name], token)
    for key in _SCHEMA:
        if key.name not in values:
            raise ConfigError(f"missing config key {key.name!r}")
    return SourceConfig(values=values)


def load_config(path) -> SourceConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {str(path)!r}: "
                          f"{exc.strerror}") from None
    return parse_config_text(text)
