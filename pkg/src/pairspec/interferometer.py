"""Two-arm delay-scan forward model and scan planning.

Each photon of a pair passes its own balanced Michelson-type interferometer
with delay tau_A or tau_B; the coincidence probability is the joint spectrum
filtered by the product of the two cosine transmission functions,

    p(tau_A, tau_B) = 1/4 * integral S(w_A, w_B)
                      * (1 + cos w_A tau_A) (1 + cos w_B tau_B) dw_A dw_B.

Scans run on a rotated rectangular lattice in the delay plane. The rotation
angle follows the central fringe direction, so the fast axis (u) needs fine
steps while the transverse axis (v), which only tracks the spectral envelope,
can be stepped coarsely. Axis (single-arm) interference terms then alias in
the sampled frequency plane by construction; the planner verifies that no
folded copy lands on the joint-frequency islands used for reconstruction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
from scipy import stats

from .errors import (
    AliasOverlapError,
    ConfigError,
    NumericError,
    OverflowCountError,
    ScanRangeError,
)
from .spdc import (
    JointSpectrum,
    _trapezoid_weights,
    spectrum_moments,
    spectrum_second_moments,
)

# counts above this are not exactly representable in float64
_MAX_EXACT_COUNT = 2.0**53

# rows per matrix block in the bilinear-form evaluation
_TAU_CHUNK = 4096


@dataclass(frozen=True)
class ScanPlan:
    """Rotated rectangular lattice of delay pairs.

    Index (i, j) maps to lattice coordinates u = (i - n_u//2) * step_u_s and
    v = (j - n_v//2) * step_v_s, so the zero-delay point is always on the
    lattice. Delays are (tau_A, tau_B) = (u cos t - v sin t, u sin t + v cos t)
    with t = theta_rad.
    """

    theta_rad: float
    step_u_s: float
    step_v_s: float
    n_u: int
    n_v: int
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.theta_rad):
            raise ConfigError("scan rotation angle must be finite")
        if self.step_u_s <= 0 or self.step_v_s <= 0:
            raise ConfigError("scan steps must be positive")
        if self.n_u < 2 or self.n_v < 2:
            raise ConfigError("scan needs at least 2 points per axis")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_u, self.n_v)

    @property
    def u_delays(self) -> np.ndarray:
        return (np.arange(self.n_u) - self.n_u // 2) * self.step_u_s

    @property
    def v_delays(self) -> np.ndarray:
        return (np.arange(self.n_v) - self.n_v // 2) * self.step_v_s

    def delay_points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Arm delays (tau_a, tau_b), each of shape (n_u, n_v), in seconds."""
        u, v = np.meshgrid(self.u_delays, self.v_delays, indexing="ij")
        ct, st = np.cos(self.theta_rad), np.sin(self.theta_rad)
        return u * ct - v * st, u * st + v * ct

    def max_abs_delay(self) -> float:
        """Largest |tau| reached in either arm, in seconds."""
        tau_a, tau_b = self.delay_points()
        return float(max(np.abs(tau_a).max(), np.abs(tau_b).max()))


@dataclass(frozen=True)
class DetectionSpec:
    """Count-rate model for one scan point.

    The expected coincidence count in a dwell is
    dwell_s * (pair_rate_scale_hz * p / p(0, 0) + dark_rate_hz), so
    pair_rate_scale_hz is the coincidence rate at the zero-delay point.
    """

    dwell_s: float = 3.0
    pair_rate_scale_hz: float = 1000.0
    dark_rate_hz: float = 0.0
    visibility: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.dwell_s <= 0:
            raise ConfigError("dwell time must be positive")
        if self.pair_rate_scale_hz < 0 or self.dark_rate_hz < 0:
            raise ConfigError("rates must be non-negative")
        if not 0.0 <= self.visibility <= 1.0:
            raise ConfigError("visibility must lie in [0, 1]")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigError("rng seed must fit in 64 bits")


@dataclass(frozen=True)
class Interferogram:
    """Counts (or expectations) on a scan lattice."""

    plan: ScanPlan
    values: np.ndarray
    kind: str  # "sampled", "expected", or "residual"
    dwell_s: float
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != self.plan.shape:
            raise ConfigError(
                f"values shape {values.shape} != plan shape {self.plan.shape}")
        if self.kind not in ("sampled", "expected", "residual"):
            raise ConfigError(f"unknown interferogram kind {self.kind!r}")
        if not np.all(np.isfinite(values)):
            raise NumericError("interferogram values must be finite")
        if self.kind != "residual" and np.any(values < 0):
            raise NumericError("interferogram counts must be >= 0")


def fine_nyquist_step(center_omega_a: float, center_omega_b: float) -> float:
    """Largest fast-axis step that still samples the central fringe.

    Along the fringe-aligned fast axis the phase advances at the joint rate
    hypot(w_A0, w_B0); the returned step places that rate exactly at the
    sampling Nyquist frequency.
    """
    rate = np.hypot(center_omega_a, center_omega_b)
    if rate <= 0:
        raise ConfigError("centre frequencies must be positive")
    return float(np.pi / rate)


def _fold(x, nyquist):
    """Wrap frequencies into the principal interval [-nyquist, nyquist)."""
    return np.mod(x + nyquist, 2.0 * nyquist) - nyquist


def _component_samples(center_a, center_b, bw_a, bw_b, theta):
    """Foreign spectral components that must not alias onto the joint islands.

    Returns a list of (label, omega_u, omega_v) sample arrays in the rotated
    frame: both single-arm (axis) bands and both anti-diagonal joint islands,
    each with its mirror image.
    """
    ct, st = np.cos(theta), np.sin(theta)
    out = []
    line = np.linspace(-0.5, 0.5, 257)
    for sign in (+1.0, -1.0):
        wa = sign * (center_a + bw_a * line)
        out.append(("axis-a", wa * ct, -wa * st))
        wb = sign * (center_b + bw_b * line)
        out.append(("axis-b", wb * st, wb * ct))
    sq_a, sq_b = np.meshgrid(line, line, indexing="ij")
    for sign in (+1.0, -1.0):
        wa = sign * (center_a + bw_a * sq_a).ravel()
        wb = -sign * (center_b + bw_b * sq_b).ravel()
        out.append(("anti-diagonal", wa * ct + wb * st, -wa * st + wb * ct))
    return out


def plan_scan(
    center_omega_a: float,
    center_omega_b: float,
    bandwidth_a: float,
    bandwidth_b: float,
    oversampling: float = 1.5,
    resolution_fraction: int = 8,
    max_delay_s: float = 250e-15,
    guard_bins: float = 2.0,
    step_u_s: float = None,
    step_v_s: float = None,
    n_u: int = None,
    n_v: int = None,
    source_var_a: float = None,
    source_var_b: float = None,
    source_cov: float = None,
) -> ScanPlan:
    """Size a rotated scan for a spectrum of known centre and full width.

    The bandwidths are the full spectral widths to protect from aliasing
    (for near-Gaussian spectra about 8.5 times the rms width). The fast
    step is the fine Nyquist step divided by `oversampling`; the transverse
    step undersamples the single-arm fringes on purpose and is set by the
    envelope extent of the joint islands alone; if a folded component
    would land on a protected region at the derived transverse step, the
    planner retries with a slightly finer one until the fold pattern
    clears. Explicit `step_u_s` or `step_v_s` override the derived steps
    and are never nudged, but still pass every check, so a fast step too
    coarse for the central fringe is rejected. Point counts come from
    requiring a frequency resolution of bandwidth/resolution_fraction on
    the narrower arm, rounded up to powers of two; explicit `n_u` or
    `n_v` override the derived counts (they need not be powers of two).
    Raises ScanRangeError if the lattice would exceed `max_delay_s` in
    either arm, and AliasOverlapError if no collision-free lattice is
    found.

    When the source's second central moments are known (variances and the
    cross covariance of the joint spectrum), pass them as `source_var_a`,
    `source_var_b` and `source_cov`: they are recorded in the plan
    metadata so downstream separable-background regression can exclude
    exactly the delay region where pair interference survives, which for
    a frequency-correlated source is an elongated strip rather than a
    small box.
    """
    if min(center_omega_a, center_omega_b) <= 0:
        raise ConfigError("centre frequencies must be positive")
    if min(bandwidth_a, bandwidth_b) <= 0:
        raise ConfigError("bandwidths must be positive")
    if oversampling <= 1.0:
        raise ConfigError("oversampling must exceed 1")
    if resolution_fraction < 1:
        raise ConfigError("resolution_fraction must be >= 1")

    moments = (source_var_a, source_var_b, source_cov)
    have_moments = all(m is not None for m in moments)
    if any(m is not None for m in moments) and not have_moments:
        raise ConfigError(
            "source_var_a, source_var_b and source_cov must be given "
            "together")
    if have_moments:
        if source_var_a <= 0 or source_var_b <= 0:
            raise ConfigError("source variances must be positive")
        if source_cov ** 2 >= source_var_a * source_var_b:
            raise ConfigError(
                "source covariance must satisfy cov^2 < var_a * var_b")

    theta = float(np.arctan2(center_omega_b, center_omega_a))
    ct, st = np.cos(theta), np.sin(theta)
    omega_u0 = center_omega_a * ct + center_omega_b * st
    half_u = 0.5 * (bandwidth_a * ct + bandwidth_b * st)
    half_v = 0.5 * (bandwidth_a * st + bandwidth_b * ct)

    step_u = fine_nyquist_step(center_omega_a, center_omega_b) / oversampling
    step_v = float(np.pi / (oversampling * half_v))
    if step_u_s is not None:
        if step_u_s <= 0:
            raise ConfigError("step_u_s must be positive")
        step_u = float(step_u_s)
    if step_v_s is not None:
        if step_v_s <= 0:
            raise ConfigError("step_v_s must be positive")
        step_v = float(step_v_s)

    for name, count in (("n_u", n_u), ("n_v", n_v)):
        if count is not None and int(count) < 2:
            raise ConfigError(f"{name} must be >= 2")

    bw_min = min(bandwidth_a, bandwidth_b)
    target = bw_min / resolution_fraction
    points_u = int(n_u) if n_u is not None \
        else _next_pow2(2.0 * np.pi / (step_u * target))

    # an explicit transverse step is honoured or rejected as-is; a derived
    # one may be nudged finer to steer folded components off the islands
    n_tries = 1 if step_v_s is not None else 40
    for attempt in range(n_tries):
        trial_v = step_v * 0.97 ** attempt
        points_v = int(n_v) if n_v is not None \
            else _next_pow2(2.0 * np.pi / (trial_v * target))
        plan_meta = {
            "center_omega_a": float(center_omega_a),
            "center_omega_b": float(center_omega_b),
            "bandwidth_a": float(bandwidth_a),
            "bandwidth_b": float(bandwidth_b),
            "oversampling": float(oversampling),
            "resolution_fraction": int(resolution_fraction),
            "guard_bins": float(guard_bins),
            "omega_u0": float(omega_u0),
            "island_half_u": float(half_u),
            "island_half_v": float(half_v),
        }
        if have_moments:
            plan_meta["moment_var_a"] = float(source_var_a)
            plan_meta["moment_var_b"] = float(source_var_b)
            plan_meta["moment_cov"] = float(source_cov)
        plan = ScanPlan(
            theta_rad=theta,
            step_u_s=step_u,
            step_v_s=trial_v,
            n_u=points_u,
            n_v=points_v,
            meta=plan_meta,
        )

        reach = plan.max_abs_delay()
        if reach > max_delay_s:
            raise ScanRangeError(
                f"scan range needs |tau| up to {reach * 1e15:.1f} fs "
                f"but the stage limit is {max_delay_s * 1e15:.1f} fs")

        try:
            _check_aliasing(plan, center_omega_a, center_omega_b,
                            bandwidth_a, bandwidth_b, guard_bins)
        except AliasOverlapError:
            if attempt == n_tries - 1:
                raise
            continue
        return plan


def plan_for_spectrum(spectrum: JointSpectrum,
                      rms_multiplier: float = 8.5,
                      **kwargs) -> ScanPlan:
    """Plan a scan from measured spectrum moments.

    The protected bandwidth is rms_multiplier times the rms width of each
    marginal; the default covers a Gaussian to about the 1e-4 level. The
    second central moments, covariance included, are recorded in the plan
    so later processing knows the shape of the pair-interference region.
    """
    ca, cb, ra, rb = spectrum_moments(spectrum)
    var_a, var_b, cov = spectrum_second_moments(spectrum)
    return plan_scan(ca, cb, rms_multiplier * ra, rms_multiplier * rb,
                     source_var_a=var_a, source_var_b=var_b,
                     source_cov=cov, **kwargs)


def _next_pow2(x: float) -> int:
    n = 2
    while n < x:
        n *= 2
    return n


def _check_aliasing(plan, center_a, center_b, bw_a, bw_b, guard_bins):
    """Verify folded foreign components miss the joint islands and dc bin."""
    ny_u = np.pi / plan.step_u_s
    ny_v = np.pi / plan.step_v_s
    d_u = 2.0 * np.pi / (plan.n_u * plan.step_u_s)
    d_v = 2.0 * np.pi / (plan.n_v * plan.step_v_s)
    guard_u = guard_bins * d_u
    guard_v = guard_bins * d_v

    omega_u0 = plan.meta["omega_u0"]
    half_u = plan.meta["island_half_u"] + guard_u
    half_v = plan.meta["island_half_v"] + guard_v

    if omega_u0 + half_u > ny_u:
        raise AliasOverlapError(
            "joint island exceeds the fast-axis Nyquist range; "
            "increase oversampling")
    if half_v > ny_v:
        raise AliasOverlapError(
            "joint island exceeds the transverse Nyquist range; "
            "increase oversampling")

    for label, wu, wv in _component_samples(
            center_a, center_b, bw_a, bw_b, plan.theta_rad):
        fu = _fold(wu, ny_u)
        fv = _fold(wv, ny_v)
        on_island = (np.abs(np.abs(fu) - omega_u0) <= half_u) \
            & (np.abs(fv) <= half_v)
        on_dc = (np.abs(fu) <= guard_u) & (np.abs(fv) <= guard_v)
        if np.any(on_island) or np.any(on_dc):
            raise AliasOverlapError(
                f"folded {label} term lands on a protected region; "
                "adjust steps or oversampling")


def coincidence_probability(spectrum: JointSpectrum, tau_a, tau_b,
                            visibility: float = 1.0) -> np.ndarray:
    """Coincidence probability (unnormalized) at delay pairs.

    Evaluates the filtered double integral with trapezoid weights on the
    spectrum grid, as a matrix product over blocks of delay pairs. At zero
    delay with unit visibility the result equals the trapezoid integral of
    the joint spectrum. Inputs broadcast; the result keeps their shape.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ConfigError("visibility must lie in [0, 1]")
    tau_a, tau_b = np.broadcast_arrays(
        np.asarray(tau_a, dtype=float), np.asarray(tau_b, dtype=float))
    shape = tau_a.shape
    ta = tau_a.ravel()
    tb = tau_b.ravel()

    grid = spectrum.grid
    wa = _trapezoid_weights(grid.omega_a.size) * grid.d_omega_a
    wb = _trapezoid_weights(grid.omega_b.size) * grid.d_omega_b
    weighted = wa[:, None] * spectrum.values * wb[None, :]

    out = np.empty(ta.size, dtype=float)
    for start in range(0, ta.size, _TAU_CHUNK):
        sl = slice(start, min(start + _TAU_CHUNK, ta.size))
        gate_a = 1.0 + visibility * np.cos(np.outer(ta[sl], grid.omega_a))
        gate_b = 1.0 + visibility * np.cos(np.outer(tb[sl], grid.omega_b))
        out[sl] = 0.25 * np.einsum(
            "tb,tb->t", gate_a @ weighted, gate_b, optimize=True)
    return out.reshape(shape)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _point_uniforms(seed: int, n_u: int, n_v: int) -> np.ndarray:
    """Deterministic uniform variate in (0, 1) for every lattice index.

    Per point (i, j) the generator mixes seed, i and j through the standard
    64-bit finalizer, so any single point can be reproduced without drawing
    the rest of the lattice.
    """
    i, j = np.meshgrid(np.arange(n_u, dtype=np.uint64),
                       np.arange(n_v, dtype=np.uint64), indexing="ij")
    z0 = (int(seed) + 0x9E3779B97F4A7C15) % 2**64
    z = np.full_like(i, np.uint64(z0))
    z = _mix64(z)
    z = _mix64(z ^ (i * np.uint64(0xD1342543DE82EF95)))
    z = _mix64(z ^ (j * np.uint64(0xAF251AF3B0F025B5)))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def expected_counts(spectrum: JointSpectrum, plan: ScanPlan,
                    detection: DetectionSpec) -> np.ndarray:
    """Expected coincidence counts at every scan point."""
    tau_a, tau_b = plan.delay_points()
    p = coincidence_probability(spectrum, tau_a, tau_b, detection.visibility)
    p_zero = coincidence_probability(
        spectrum, 0.0, 0.0, detection.visibility)
    p_zero = float(p_zero)
    if p_zero <= 0:
        raise NumericError("zero-delay probability is not positive")
    rate = detection.pair_rate_scale_hz * (p / p_zero) + detection.dark_rate_hz
    return detection.dwell_s * rate


def synthesize(spectrum: JointSpectrum, plan: ScanPlan,
               detection: DetectionSpec, kind: str = "sampled") -> Interferogram:
    """Simulate one scan: expected counts, optionally Poisson-sampled.

    Sampling inverts the Poisson CDF at a per-point deterministic uniform
    variate, so the same (seed, plan) pair always yields the same counts,
    independent of evaluation order or chunking.
    """
    if kind not in ("sampled", "expected"):
        raise ConfigError(f"unknown synthesis kind {kind!r}")
    mu = expected_counts(spectrum, plan, detection)
    if np.any(mu > _MAX_EXACT_COUNT):
        raise OverflowCountError(
            "expected counts exceed 2**53 and would lose integer exactness")
    if kind == "expected":
        values = mu
    else:
        u = _point_uniforms(detection.rng_seed, plan.n_u, plan.n_v)
        values = stats.poisson.ppf(u, mu)
    return Interferogram(
        plan=plan,
        values=values,
        kind=kind,
        dwell_s=detection.dwell_s,
        meta={
            "pair_rate_scale_hz": detection.pair_rate_scale_hz,
            "dark_rate_hz": detection.dark_rate_hz,
            "visibility": detection.visibility,
            "rng_seed": int(detection.rng_seed),
        },
    )
