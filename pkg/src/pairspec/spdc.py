"""Joint spectral model of a fibre-coupled type-I down-conversion source.

The joint amplitude on a frequency grid is

    A(wA, wB) = E_p(wA + wB) * integral d2qA d2qB
                E_t(qA + qB) uA*(qA) uB*(qB) sinc(dkz L/2) exp(i dkz L/2)

with E_p the pump spectral amplitude, E_t its transverse profile, uA/uB the
Gaussian collection modes centred on the external collection angles (opposite
sides of the pump), and dkz the longitudinal mismatch with paraxial transverse
corrections. The 4D integral is evaluated by tensor-product Gauss-Hermite
quadrature in whitened coordinates: the Gaussian factors are absorbed exactly
into the quadrature weight by completing the square and Cholesky-factoring the
resulting quadratic form, so the nodes only sample the slowly varying
phase-matching factor.

Angular frequencies are rad/s, lengths metres, angles radians.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C_LIGHT

from . import kernels
from .crystal import CrystalSpec, extraordinary_index, ordinary_index
from .errors import (
    ConfigError,
    NumericError,
    ParaxialDomainError,
    QuadratureConvergenceError,
)

TWO_PI_C = 2.0 * np.pi * C_LIGHT  # rad m / s

# helpers ------------------------------------------------------------------


def wavelength_to_omega(wavelength_m):
    """Vacuum wavelength (m) to angular frequency (rad/s)."""
    return TWO_PI_C / np.asarray(wavelength_m, dtype=float)


def omega_to_wavelength(omega):
    """Angular frequency (rad/s) to vacuum wavelength (m)."""
    return TWO_PI_C / np.asarray(omega, dtype=float)


# specs ---------------------------------------------------------------------


@dataclass(frozen=True)
class PumpSpec:
    """Pulsed pump: centre wavelength, intensity-FWHM duration, waist.

    Average power and repetition rate are recorded for provenance; absolute
    count rates are set by the detection-side rate scale.
    """

    center_wavelength_m: float = 390e-9
    duration_fwhm_s: float = 100e-15
    waist_radius_m: float = 77.5e-6
    average_power_w: float = 0.020
    rep_rate_hz: float = 80e6

    def __post_init__(self):
        for name in ("center_wavelength_m", "duration_fwhm_s", "waist_radius_m",
                     "average_power_w", "rep_rate_hz"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"pump {name} must be positive")

    @property
    def center_omega(self) -> float:
        return TWO_PI_C / self.center_wavelength_m


@dataclass(frozen=True)
class CollectionSpec:
    """Fibre-defined Gaussian collection modes at external angles.

    The two arms sit on opposite sides of the pump axis in the x-z plane;
    transverse wavevector is conserved through the exit face, so a mode at
    external angle theta and frequency w is centred on q = (w/c) sin(theta).
    """

    angle_a_rad: float = np.deg2rad(1.28)
    angle_b_rad: float = np.deg2rad(1.05)
    waist_a_m: float = 80e-6
    waist_b_m: float = 80e-6

    def __post_init__(self):
        for name in ("angle_a_rad", "angle_b_rad"):
            angle = getattr(self, name)
            if not 0 < angle < 0.2:
                raise ConfigError(
                    f"collection {name} must be positive and paraxially small "
                    f"(< 0.2 rad), got {angle}"
                )
        for name in ("waist_a_m", "waist_b_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"collection {name} must be positive")


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform, strictly positive angular-frequency grid, one axis per photon."""

    omega_a: np.ndarray
    omega_b: np.ndarray

    def __post_init__(self):
        for name in ("omega_a", "omega_b"):
            ax = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, ax)
            if ax.ndim != 1 or ax.size < 2:
                raise ConfigError(f"{name} must be a 1D axis with >= 2 points")
            if not np.all(ax > 0):
                raise ConfigError(f"{name} must be strictly positive")
            steps = np.diff(ax)
            if not np.all(steps > 0):
                raise ConfigError(f"{name} must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
                raise ConfigError(f"{name} must be uniformly spaced")

    @classmethod
    def from_wavelength_bounds(cls, lam_a_m, lam_b_m, n_a, n_b):
        """Uniform-in-omega grid between wavelength bounds (min_m, max_m)."""
        def axis(bounds, n):
            lo, hi = min(bounds), max(bounds)
            return np.linspace(TWO_PI_C / hi, TWO_PI_C / lo, n)

        return cls(axis(lam_a_m, n_a), axis(lam_b_m, n_b))

    @property
    def d_omega_a(self) -> float:
        return float(self.omega_a[1] - self.omega_a[0])

    @property
    def d_omega_b(self) -> float:
        return float(self.omega_b[1] - self.omega_b[0])

    @property
    def shape(self):
        return (self.omega_a.size, self.omega_b.size)

    def meshgrid(self):
        return np.meshgrid(self.omega_a, self.omega_b, indexing="ij")


def _check_values(grid, values, ndim_kind):
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ConfigError(
            f"values shape {values.shape} does not match grid shape {grid.shape}"
        )
    if not np.all(np.isfinite(values if ndim_kind == "complex" else values)):
        raise NumericError("non-finite values in spectral array")
    return values


@dataclass(frozen=True)
class JointAmplitude:
    """Complex joint spectral amplitude on a frequency grid."""

    grid: FrequencyGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "values", _check_values(self.grid, self.values, "complex").astype(np.complex128)
        )

    def intensity(self) -> "JointSpectrum":
        return joint_intensity(self)


@dataclass(frozen=True)
class JointSpectrum:
    """Real non-negative joint spectral intensity on a frequency grid."""

    grid: FrequencyGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = _check_values(self.grid, self.values, "real").astype(np.float64)
        if np.any(vals < 0):
            raise NumericError("joint spectral intensity must be non-negative")
        object.__setattr__(self, "values", vals)


# operations ----------------------------------------------------------------


def pump_envelope(pump: PumpSpec, omega_sum):
    """Pump spectral amplitude at the sum frequency, peak normalized to 1.

    Gaussian pulse with intensity FWHM tau: amplitude
    exp(-(w - w0)^2 tau^2 / (8 ln 2)); the squared amplitude falls to 1/2 at
    the spectral intensity half-width 2 ln2 / tau.
    """
    d = np.asarray(omega_sum, dtype=float) - pump.center_omega
    tau = pump.duration_fwhm_s
    return np.exp(-(d**2) * tau**2 / (8.0 * np.log(2.0)))


def _wavevectors(crystal: CrystalSpec, omega_a, omega_b):
    """On-axis wavevector magnitudes (pump e-wave at cut angle, pair o-waves)."""
    omega_a = np.asarray(omega_a, dtype=float)
    omega_b = np.asarray(omega_b, dtype=float)
    omega_s = omega_a + omega_b
    k_p = extraordinary_index(TWO_PI_C / omega_s, crystal.cut_angle_rad, crystal) * omega_s / C_LIGHT
    k_a = ordinary_index(TWO_PI_C / omega_a, crystal) * omega_a / C_LIGHT
    k_b = ordinary_index(TWO_PI_C / omega_b, crystal) * omega_b / C_LIGHT
    return k_p, k_a, k_b


def longitudinal_mismatch(crystal: CrystalSpec, omega_a, omega_b,
                          q_ax=0.0, q_ay=0.0, q_bx=0.0, q_by=0.0):
    """Longitudinal wavevector mismatch dk_z with paraxial corrections.

    dk_z = k_p,z - k_A,z - k_B,z with k_z ~ k - |q|^2/(2k) for each wave; the
    pump carries the summed transverse wavevector q_A + q_B. Raises
    ParaxialDomainError when any |q| exceeds 0.2 k.
    """
    k_p, k_a, k_b = _wavevectors(crystal, omega_a, omega_b)
    q_ax, q_ay = np.asarray(q_ax, float), np.asarray(q_ay, float)
    q_bx, q_by = np.asarray(q_bx, float), np.asarray(q_by, float)
    qa_sq = q_ax**2 + q_ay**2
    qb_sq = q_bx**2 + q_by**2
    qp_sq = (q_ax + q_bx) ** 2 + (q_ay + q_by) ** 2
    for q_sq, k, label in ((qa_sq, k_a, "A"), (qb_sq, k_b, "B"), (qp_sq, k_p, "pump")):
        if np.any(q_sq > (0.2 * k) ** 2):
            raise ParaxialDomainError(
                f"transverse wavevector of the {label} wave exceeds 0.2 k; "
                "paraxial expansion invalid"
            )
    return (k_p - qp_sq / (2 * k_p)) - (k_a - qa_sq / (2 * k_a)) - (k_b - qb_sq / (2 * k_b))


def _whitened_nodes(order, w_pump, w_a, w_b):
    """Quadrature node offsets and weights for one transverse block.

    The Gaussian factor exp(-G) has Hessian H (same for both blocks); nodes
    are v0 + sqrt(2) L^-T u at tensor Gauss-Hermite points u. Returns the
    offset pattern (pa, pb), tensor weights, and the Jacobian factor
    2/det(L) per block.
    """
    if order < 2:
        raise ConfigError(f"quadrature order must be >= 2, got {order}")
    x, w = np.polynomial.hermite.hermgauss(order)
    h = np.array([
        [(w_pump**2 + w_a**2) / 2.0, w_pump**2 / 2.0],
        [w_pump**2 / 2.0, (w_pump**2 + w_b**2) / 2.0],
    ])
    chol = np.linalg.cholesky(h)
    pattern = np.sqrt(2.0) * np.linalg.inv(chol).T  # maps u -> node offsets
    ua, ub = np.meshgrid(x, x, indexing="ij")
    offsets = pattern @ np.vstack([ua.ravel(), ub.ravel()])
    weights = np.outer(w, w).ravel()
    jac = 2.0 / (chol[0, 0] * chol[1, 1])
    return offsets[0].copy(), offsets[1].copy(), weights, jac, h


def _mode_centers(collection: CollectionSpec, omega_a, omega_b):
    """Central transverse wavevectors of the two collection modes (1/m)."""
    alpha = (np.asarray(omega_a, float) / C_LIGHT) * np.sin(collection.angle_a_rad)
    beta = -(np.asarray(omega_b, float) / C_LIGHT) * np.sin(collection.angle_b_rad)
    return alpha, beta


def _amplitude_points(crystal, pump, collection, omega_a, omega_b, order, workers):
    """Joint amplitude at flat arrays of frequency pairs (full quadrature)."""
    k_p, k_a, k_b = _wavevectors(crystal, omega_a, omega_b)
    dk0 = k_p - k_a - k_b
    cp, ca, cb = 1.0 / (2 * k_p), 1.0 / (2 * k_a), 1.0 / (2 * k_b)

    w_a, w_b = collection.waist_a_m, collection.waist_b_m
    pa, pb, wts, jac, h = _whitened_nodes(order, pump.waist_radius_m, w_a, w_b)
    alpha, beta = _mode_centers(collection, omega_a, omega_b)

    # centre of the x-block Gaussian and its residual exponent
    m_a = w_a**2 * alpha / 2.0
    m_b = w_b**2 * beta / 2.0
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    v0a = (h[1, 1] * m_a - h[0, 1] * m_b) / det
    v0b = (h[0, 0] * m_b - h[0, 1] * m_a) / det
    g0 = (w_a**2 * alpha**2 + w_b**2 * beta**2) / 4.0 - 0.5 * (v0a * m_a + v0b * m_b)

    half_length = crystal.length_m / 2.0
    n = dk0.size
    args = (dk0, cp, ca, cb, v0a, v0b)

    if workers > 1 and n >= 4 * workers:
        out = np.empty(n, dtype=np.complex128)
        bounds = np.linspace(0, n, workers + 1, dtype=int)
        def run(lo, hi):
            out[lo:hi] = kernels.phase_matched_sum(
                *(a[lo:hi] for a in args), pa, pb, wts, half_length)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda se: run(*se), zip(bounds[:-1], bounds[1:])))
    else:
        out = kernels.phase_matched_sum(*args, pa, pb, wts, half_length)

    envelope = pump_envelope(pump, omega_a + omega_b)
    return envelope * jac**2 * np.exp(-g0) * out


def _amplitude_points_central(crystal, pump, collection, omega_a, omega_b):
    """Fast preview: the integrand at the central plane-wave pair only.

    Samples q at the collection-mode centres instead of integrating, keeping
    the pump transverse profile at the summed centre. Scale differs from the
    full quadrature (no mode volume); shapes agree when the modes are narrow.
    """
    alpha, beta = _mode_centers(collection, omega_a, omega_b)
    dkz = longitudinal_mismatch(crystal, omega_a, omega_b, alpha, 0.0, beta, 0.0)
    x = dkz * (crystal.length_m / 2.0)
    phase = _sinc(x) * np.exp(1j * x)
    trans = np.exp(-(pump.waist_radius_m**2) * (alpha + beta) ** 2 / 4.0)
    return pump_envelope(pump, omega_a + omega_b) * trans * phase


def _sinc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


def joint_amplitude(crystal: CrystalSpec, pump: PumpSpec, collection: CollectionSpec,
                    grid: FrequencyGrid, order: int = 12, mode: str = "gauss-hermite",
                    tolerance: float = 1e-3, workers: int = 1) -> JointAmplitude:
    """Joint spectral amplitude of the collected pair on a frequency grid.

    Parameters
    ----------
    order : int
        Gauss-Hermite order per transverse dimension (full mode).
    mode : str
        "gauss-hermite" for the full 4D quadrature, "central" for the fast
        plane-wave-pair preview.
    tolerance : float
        Relative agreement required between orders N and 2N at the grid peak;
        exceeded -> QuadratureConvergenceError.
    workers : int
        Thread count for chunking the grid; results are independent of it.
    """
    if mode not in ("gauss-hermite", "central"):
        raise ConfigError(f"unknown evaluation mode {mode!r}")
    wa, wb = grid.meshgrid()
    flat_a, flat_b = wa.ravel(), wb.ravel()

    if mode == "central":
        values = _amplitude_points_central(crystal, pump, collection, flat_a, flat_b)
    else:
        values = _amplitude_points(crystal, pump, collection, flat_a, flat_b, order, workers)
        # convergence audit at the grid peak: N against 2N
        peak = int(np.argmax(np.abs(values)))
        ref = _amplitude_points(crystal, pump, collection,
                                flat_a[peak:peak + 1], flat_b[peak:peak + 1],
                                2 * order, 1)[0]
        got = values[peak]
        scale = max(abs(ref), abs(got))
        if scale > 0 and abs(got - ref) / scale > tolerance:
            raise QuadratureConvergenceError(
                f"quadrature not converged at grid peak: order {order} vs "
                f"{2 * order} differ by {abs(got - ref) / scale:.3e} "
                f"(tolerance {tolerance:.3e})", got, ref)

    meta = {"mode": mode, "quadrature_order": str(order)}
    return JointAmplitude(grid, values.reshape(grid.shape), meta)


def joint_intensity(amplitude: JointAmplitude) -> JointSpectrum:
    """Joint spectral intensity |A|^2 on the amplitude's grid."""
    vals = np.abs(amplitude.values) ** 2
    return JointSpectrum(amplitude.grid, vals, dict(amplitude.meta))


# spectrum summaries ---------------------------------------------------------


def marginals(spectrum: JointSpectrum):
    """Trapezoid-weighted marginals over each axis: (marginal_a, marginal_b)."""
    tb = _trapezoid_weights(spectrum.grid.omega_b.size) * spectrum.grid.d_omega_b
    ta = _trapezoid_weights(spectrum.grid.omega_a.size) * spectrum.grid.d_omega_a
    return spectrum.values @ tb, ta @ spectrum.values


def _trapezoid_weights(n):
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def spectrum_moments(spectrum: JointSpectrum):
    """Intensity-weighted centres and rms widths per axis.

    Returns (center_a, center_b, rms_a, rms_b) in rad/s. For planning a scan
    of a Gaussian-like spectrum, an alias-protection bandwidth of about
    8.5 rms widths corresponds to six 1/e half-widths.
    """
    ma, mb = marginals(spectrum)
    wa, wb = spectrum.grid.omega_a, spectrum.grid.omega_b
    if ma.sum() <= 0 or mb.sum() <= 0:
        raise NumericError("cannot take moments of an empty spectrum")
    ca = float((wa * ma).sum() / ma.sum())
    cb = float((wb * mb).sum() / mb.sum())
    ra = float(np.sqrt(((wa - ca) ** 2 * ma).sum() / ma.sum()))
    rb = float(np.sqrt(((wb - cb) ** 2 * mb).sum() / mb.sum()))
    return ca, cb, ra, rb


def spectrum_second_moments(spectrum: JointSpectrum):
    """Intensity-weighted second central moments of the joint spectrum.

    Returns (var_a, var_b, cov) in (rad/s)^2. The cross covariance is what
    distinguishes a frequency-correlated pair source from a separable one:
    it sets the orientation and aspect ratio of the joint island, and
    through the Fourier transform, the delay region where pair
    interference survives (the envelope is exp(-tau' Sigma tau / 2) for a
    Gaussian island with covariance Sigma).
    """
    ta = _trapezoid_weights(spectrum.grid.omega_a.size)
    tb = _trapezoid_weights(spectrum.grid.omega_b.size)
    weights = ta[:, None] * spectrum.values * tb[None, :]
    total = weights.sum()
    if total <= 0:
        raise NumericError("cannot take moments of an empty spectrum")
    wa = spectrum.grid.omega_a
    wb = spectrum.grid.omega_b
    ca = float((weights.sum(axis=1) * wa).sum() / total)
    cb = float((weights.sum(axis=0) * wb).sum() / total)
    da = wa - ca
    db = wb - cb
    var_a = float((weights.sum(axis=1) * da ** 2).sum() / total)
    var_b = float((weights.sum(axis=0) * db ** 2).sum() / total)
    cov = float((da[:, None] * weights * db[None, :]).sum() / total)
    return var_a, var_b, cov
