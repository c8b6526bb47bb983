"""Fourier-domain reconstruction of the joint spectrum from scan counts.

The count lattice is transformed with the e^{+i omega tau} convention and
phases referenced to the true (centred) delays, so a spectrum that is real
and symmetric about the lattice centre transforms to a nearly real map. In
the two-dimensional frequency plane the four factors of the transmission
product separate cleanly: a dc spike, one band per single-arm interference
term, and four joint islands, one per sign pair. The diagonal (++ / --)
islands carry the joint spectrum; the planner guarantees that nothing
aliases onto them even though the transverse axis undersamples the
single-arm fringes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
from scipy import sparse
from scipy.signal import windows

from .errors import ConfigError, NumericError, WavelengthRangeError
from .interferometer import Interferogram
from .spdc import TWO_PI_C

_WINDOWS = ("none", "hann")

# pair-envelope level protected from the separable-background fit: points
# where exp(-tau' Sigma tau / 2) exceeds exp(-K^2/2) are left out of the
# regression (K sigma of the joint-coherence ellipse)
_PAIR_EXCLUSION_SIGMAS = 3.5


@dataclass(frozen=True)
class FrequencyMap:
    """Two-dimensional transform of an interferogram.

    `values` is fftshifted: bin (i, j) sits at (omega_u[i], omega_v[j]) in
    the rotated frame of the scan. The zero bin of an unwindowed,
    undetrended transform equals the total count.
    """

    source: Interferogram
    values: np.ndarray
    omega_u: np.ndarray
    omega_v: np.ndarray
    window_u: np.ndarray
    window_v: np.ndarray
    detrended: bool
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def theta_rad(self) -> float:
        return self.source.plan.theta_rad

    @property
    def d_omega_u(self) -> float:
        return float(self.omega_u[1] - self.omega_u[0])

    @property
    def d_omega_v(self) -> float:
        return float(self.omega_v[1] - self.omega_v[0])

    @property
    def center_index(self) -> Tuple[int, int]:
        return (self.omega_u.size // 2, self.omega_v.size // 2)

    def omega_ab(self) -> Tuple[np.ndarray, np.ndarray]:
        """Bin frequencies rotated back to the per-arm axes."""
        wu, wv = np.meshgrid(self.omega_u, self.omega_v, indexing="ij")
        ct, st = np.cos(self.theta_rad), np.sin(self.theta_rad)
        return wu * ct - wv * st, wu * st + wv * ct


def _window(name: str, n: int) -> np.ndarray:
    if name == "none":
        return np.ones(n)
    if name == "hann":
        return windows.hann(n, sym=False)
    raise ConfigError(f"unknown window {name!r}, expected one of {_WINDOWS}")


def dft2(interferogram: Interferogram, window: str = "hann",
         detrend: bool = True) -> FrequencyMap:
    """Windowed 2D transform of the count lattice.

    Detrending subtracts the lattice mean before windowing so the large
    constant background cannot leak through the window sidelobes. With
    window="none" and detrend=False the zero-frequency bin equals the total
    count exactly.
    """
    plan = interferogram.plan
    x = np.asarray(interferogram.values, dtype=float)
    mean = float(x.mean())
    total = float(x.sum())
    if detrend:
        x = x - mean
    wu = _window(window, plan.n_u)
    wv = _window(window, plan.n_v)
    xw = x * np.outer(wu, wv)

    raw = plan.n_u * plan.n_v * np.fft.ifft2(xw)
    shifted = np.fft.fftshift(raw)
    omega_u = 2.0 * np.pi * np.fft.fftshift(
        np.fft.fftfreq(plan.n_u, d=plan.step_u_s))
    omega_v = 2.0 * np.pi * np.fft.fftshift(
        np.fft.fftfreq(plan.n_v, d=plan.step_v_s))
    # reference phases to the centred delays of the lattice
    ramp_u = np.exp(-1j * omega_u * (plan.n_u // 2) * plan.step_u_s)
    ramp_v = np.exp(-1j * omega_v * (plan.n_v // 2) * plan.step_v_s)
    values = shifted * np.outer(ramp_u, ramp_v)

    return FrequencyMap(
        source=interferogram,
        values=values,
        omega_u=omega_u,
        omega_v=omega_v,
        window_u=wu,
        window_v=wv,
        detrended=detrend,
        meta={
            "window": window,
            "sum_counts": total,
            "mean_count": mean,
            "kind": interferogram.kind,
        },
    )


def isolate_pair_interference(interferogram: Interferogram,
                              knot_spacing_s: float = None,
                              exclude_tau_a_s: float = None,
                              exclude_tau_b_s: float = None,
                              ridge: float = 1e-9) -> Interferogram:
    """Regress the separable part out of the count lattice.

    The expected count at delay (tau_a, tau_b) is a constant plus one
    single-arm interference profile per arm plus the pair term, so
    everything except the pair term is a function of tau_a alone or of
    tau_b alone. Those pieces can be fitted and subtracted directly on the
    lattice. Doing so before the transform matters: the single-arm
    profiles cross the whole lattice at full strength, and their truncated
    edges leak broadband sidelobes over the joint islands. A window would
    suppress that leakage only by blurring the islands themselves.

    Each single-arm profile is modelled as a slowly varying complex
    envelope on uniform cubic B-spline knots, demodulated at the arm
    centre frequency recorded by the planner. The spline order matters:
    the envelope representation error ripples at the knot rate, and with
    a cubic basis that ripple is fourth order in (bandwidth * spacing),
    weak enough that its folded image cannot disturb the joint islands.
    The knot spacing defaults to a tenth of each arm's coherence time; a
    scalar knot_spacing_s overrides it for both arms. Lattice points
    where the pair term is significant are excluded from the fit. When
    the plan records the source's second central moments the excluded
    region is the joint-coherence ellipse
    var_a tau_a^2 + 2 cov tau_a tau_b + var_b tau_b^2 < K^2, which for a
    frequency-correlated source is an elongated strip along the delay
    diagonal; otherwise it falls back to a box whose half-widths are the
    coherence scale implied by the planned bandwidths. Explicit
    exclude_tau_a_s / exclude_tau_b_s select the box form directly.
    The returned interferogram has kind "residual" and may contain
    negative values.
    """
    plan = interferogram.plan
    meta = plan.meta
    needed = ("center_omega_a", "center_omega_b", "bandwidth_a", "bandwidth_b")
    if not all(key in meta for key in needed):
        raise ConfigError(
            "scan plan lacks the design metadata recorded by plan_scan; "
            "cannot demodulate the single-arm terms")
    if knot_spacing_s is not None and knot_spacing_s <= 0:
        raise ConfigError("knot spacing must be positive")
    w0a = float(meta["center_omega_a"])
    w0b = float(meta["center_omega_b"])
    spacing_a = knot_spacing_s or 0.6 / float(meta["bandwidth_a"])
    spacing_b = knot_spacing_s or 0.6 / float(meta["bandwidth_b"])
    box_requested = (exclude_tau_a_s is not None
                     or exclude_tau_b_s is not None)
    if exclude_tau_a_s is None:
        exclude_tau_a_s = 21.0 / float(meta["bandwidth_a"])
    if exclude_tau_b_s is None:
        exclude_tau_b_s = 21.0 / float(meta["bandwidth_b"])

    tau_a, tau_b = plan.delay_points()
    ta = tau_a.ravel()
    tb = tau_b.ravel()
    counts = np.asarray(interferogram.values, dtype=float).ravel()
    moment_keys = ("moment_var_a", "moment_var_b", "moment_cov")
    if not box_requested and all(key in meta for key in moment_keys):
        var_a = float(meta["moment_var_a"])
        var_b = float(meta["moment_var_b"])
        cov = float(meta["moment_cov"])
        quad = var_a * ta ** 2 + 2.0 * cov * ta * tb + var_b * tb ** 2
        keep = quad >= _PAIR_EXCLUSION_SIGMAS ** 2
    else:
        keep = ~((np.abs(ta) < exclude_tau_a_s)
                 & (np.abs(tb) < exclude_tau_b_s))

    def knot_grid(tau, spacing):
        lo, hi = float(tau.min()), float(tau.max())
        n_knots = max(int(np.ceil((hi - lo) / spacing)) + 1, 2)
        return lo, (hi - lo) / (n_knots - 1), n_knots

    t0a, ha, nka = knot_grid(ta, spacing_a)
    t0b, hb, nkb = knot_grid(tb, spacing_b)
    # cubic B-splines need one ghost coefficient beyond each end knot
    cols_a = 2 * (nka + 2)
    cols_b = 2 * (nkb + 2)
    ncol = 1 + cols_a + cols_b
    if ncol > 8192:
        raise ConfigError("knot spacing too small for this lattice")

    n = counts.size
    point = np.arange(n)
    rows, cols, vals = [], [], []

    def add_arm(tau, w0, t0, h, n_knots, col0):
        pos = (tau - t0) / h
        idx = np.clip(np.floor(pos).astype(int), 0, n_knots - 2)
        x = pos - idx
        x2 = x * x
        x3 = x2 * x
        spline = (
            (1.0 - 3.0 * x + 3.0 * x2 - x3) / 6.0,
            (4.0 - 6.0 * x2 + 3.0 * x3) / 6.0,
            (1.0 + 3.0 * x + 3.0 * x2 - 3.0 * x3) / 6.0,
            x3 / 6.0,
        )
        cosw = np.cos(w0 * tau)
        sinw = np.sin(w0 * tau)
        for shift, weight in enumerate(spline):
            base = col0 + 2 * (idx + shift)  # coefficient idx-1 sits at col0
            rows.extend((point, point))
            cols.extend((base, base + 1))
            vals.extend((weight * cosw, weight * sinw))

    rows.append(point)
    cols.append(np.zeros(n, dtype=int))
    vals.append(np.ones(n))
    add_arm(ta, w0a, t0a, ha, nka, 1)
    add_arm(tb, w0b, t0b, hb, nkb, 1 + cols_a)

    design = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, ncol))
    fit_rows = design[keep]
    gram = (fit_rows.T @ fit_rows).toarray()
    rhs = fit_rows.T @ counts[keep]
    gram[np.diag_indices_from(gram)] += ridge * float(gram.diagonal().mean())
    coef = np.linalg.solve(gram, rhs)
    background = design @ coef

    return Interferogram(
        plan=plan,
        values=(counts - background).reshape(plan.shape),
        kind="residual",
        dwell_s=interferogram.dwell_s,
        meta={
            **interferogram.meta,
            "separable_removed": True,
            "separable_knots": (nka, nkb),
            "exclude_tau_a_s": float(exclude_tau_a_s),
            "exclude_tau_b_s": float(exclude_tau_b_s),
            # variance propagation must see the raw counts: a residual
            # point inherits the Poisson variance of its original count
            "variance_counts": interferogram.values.copy(),
        },
    )


@dataclass(frozen=True)
class TermMasks:
    """Disjoint partition of the frequency plane into model components."""

    dc: np.ndarray
    axis_a: np.ndarray
    axis_b: np.ndarray
    joint_pp: np.ndarray
    joint_pm: np.ndarray
    joint_mp: np.ndarray
    joint_mm: np.ndarray

    def all_masks(self):
        return (self.dc, self.axis_a, self.axis_b, self.joint_pp,
                self.joint_pm, self.joint_mp, self.joint_mm)

    def tiles(self) -> bool:
        """True when the masks cover every bin exactly once."""
        stack = np.stack([m.astype(int) for m in self.all_masks()])
        return bool(np.all(stack.sum(axis=0) == 1))


@dataclass(frozen=True)
class Terms:
    """Frequency map with its component masks."""

    fmap: FrequencyMap
    masks: TermMasks

    def dc_weight(self) -> float:
        """The zero-frequency bin (total count when unwindowed)."""
        i, j = self.fmap.center_index
        return float(self.fmap.values[i, j].real)

    def joint_values(self) -> np.ndarray:
        """Joint-spectrum estimate on the ++ island, zero elsewhere.

        The factor 4 undoes the quarter carried by the product of the two
        cosine terms; remaining lattice gain factors are common to every
        bin and drop out under normalization.
        """
        return np.where(self.masks.joint_pp,
                        4.0 * np.abs(self.fmap.values), 0.0)

    def _axis_profile(self, transverse_mask_axis: int) -> np.ndarray:
        if abs(self.fmap.theta_rad) > 1e-12:
            raise ConfigError(
                "single-arm profiles need an unrotated scan; "
                "rotated scans alias them on purpose")
        mask = self.masks.axis_a if transverse_mask_axis == 1 else self.masks.axis_b
        band = np.where(mask, self.fmap.values, 0.0)
        return 2.0 * np.abs(band.sum(axis=transverse_mask_axis))

    def marginal_a(self) -> np.ndarray:
        """|Arm-A interference| summed over its band, per omega_u bin.

        Meaningful on unrotated dense scans only; the positive-frequency
        half carries the marginal spectrum of arm A. The factor 2 undoes
        the half carried by a single cosine term.
        """
        return self._axis_profile(1)

    def marginal_b(self) -> np.ndarray:
        """Arm-B counterpart of marginal_a, per omega_v bin."""
        return self._axis_profile(0)


def extract_terms(fmap: FrequencyMap, dc_radius: float = 2.0,
                  axis_halfwidth: float = 1.5) -> Terms:
    """Partition the frequency plane into dc, axis and joint components.

    The dc disc is a Euclidean ball of `dc_radius` bins around the zero
    bin. Each axis band collects bins whose per-arm frequency is within
    `axis_halfwidth` lattice cells of zero; the cell size is the frequency
    granularity of the rotated lattice projected on that arm's axis. Bins
    claimed by an earlier mask are excluded from later ones, so the seven
    masks tile the plane.
    """
    if dc_radius < 0 or axis_halfwidth < 0:
        raise ConfigError("mask radii must be non-negative")
    n_u, n_v = fmap.values.shape
    iu = np.arange(n_u)[:, None] - n_u // 2
    jv = np.arange(n_v)[None, :] - n_v // 2
    dc = iu**2 + jv**2 <= dc_radius**2

    ct, st = np.cos(fmap.theta_rad), np.sin(fmap.theta_rad)
    cell_a = np.hypot(fmap.d_omega_u * ct, fmap.d_omega_v * st)
    cell_b = np.hypot(fmap.d_omega_u * st, fmap.d_omega_v * ct)
    omega_a, omega_b = fmap.omega_ab()

    # the band that carries arm-A fringes lies along omega_b = 0
    band_a = (np.abs(omega_b) <= axis_halfwidth * cell_b) & ~dc
    band_b = (np.abs(omega_a) <= axis_halfwidth * cell_a) & ~dc & ~band_a

    claimed = dc | band_a | band_b
    pos_a = omega_a > 0
    pos_b = omega_b > 0
    masks = TermMasks(
        dc=dc,
        axis_a=band_a,
        axis_b=band_b,
        joint_pp=~claimed & pos_a & pos_b,
        joint_pm=~claimed & pos_a & ~pos_b,
        joint_mp=~claimed & ~pos_a & pos_b,
        joint_mm=~claimed & ~pos_a & ~pos_b,
    )
    if not masks.tiles():
        raise NumericError("component masks failed to tile the plane")
    return Terms(fmap=fmap, masks=masks)


def _bilinear_indices(axis: np.ndarray, targets: np.ndarray, name: str):
    """Clip-free bilinear index pairs and weights along one axis."""
    step = axis[1] - axis[0]
    pos = (targets - axis[0]) / step
    if np.any(pos < 0) or np.any(pos > axis.size - 1):
        raise WavelengthRangeError(
            f"requested {name} range leaves the sampled frequency plane")
    i0 = np.minimum(pos.astype(int), axis.size - 2)
    frac = pos - i0
    return i0, frac


@dataclass(frozen=True)
class WavelengthSpectrum:
    """Joint spectral density resampled to wavelength axes."""

    lambda_a_m: np.ndarray
    lambda_b_m: np.ndarray
    values: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)


def sample_island(fmap: FrequencyMap, omega_a, omega_b) -> np.ndarray:
    """Joint-spectrum estimate 4|F| at per-arm frequency points.

    Points are rotated into the scan frame and read off the magnitude map
    bilinearly; shapes broadcast. Targets must stay inside the sampled
    frequency plane (the planner keeps the joint island well inside).
    """
    wa, wb = np.broadcast_arrays(
        np.asarray(omega_a, dtype=float), np.asarray(omega_b, dtype=float))
    ct, st = np.cos(fmap.theta_rad), np.sin(fmap.theta_rad)
    wu = wa * ct + wb * st
    wv = -wa * st + wb * ct
    iu, fu = _bilinear_indices(fmap.omega_u, wu.ravel(), "frequency")
    jv, fv = _bilinear_indices(fmap.omega_v, wv.ravel(), "frequency")
    mag = 4.0 * np.abs(fmap.values)
    flat = (
        mag[iu, jv] * (1 - fu) * (1 - fv)
        + mag[iu + 1, jv] * fu * (1 - fv)
        + mag[iu, jv + 1] * (1 - fu) * fv
        + mag[iu + 1, jv + 1] * fu * fv
    )
    return flat.reshape(wa.shape)


def joint_in_frequency(fmap: FrequencyMap, omega_a, omega_b,
                       normalize: bool = False) -> np.ndarray:
    """Joint-spectrum estimate on a per-arm frequency product grid."""
    wa = np.asarray(omega_a, dtype=float)
    wb = np.asarray(omega_b, dtype=float)
    if wa.ndim != 1 or wb.ndim != 1:
        raise ConfigError("frequency axes must be 1D")
    values = sample_island(fmap, wa[:, None], wb[None, :])
    if normalize:
        peak = values.max()
        if peak <= 0:
            raise NumericError("resampled spectrum has no positive values")
        values = values / peak
    return values


def joint_in_wavelength(fmap: FrequencyMap, lambda_a_m, lambda_b_m,
                        jacobian: bool = True,
                        normalize: bool = True) -> WavelengthSpectrum:
    """Resample the joint island onto a wavelength product grid.

    With `jacobian` the spectral density is converted from per-frequency
    to per-wavelength; with `normalize` the result is scaled to unit
    maximum.
    """
    lam_a = np.asarray(lambda_a_m, dtype=float)
    lam_b = np.asarray(lambda_b_m, dtype=float)
    if lam_a.ndim != 1 or lam_b.ndim != 1 or lam_a.size < 2 or lam_b.size < 2:
        raise ConfigError("wavelength axes must be 1D with at least 2 points")
    if np.any(lam_a <= 0) or np.any(lam_b <= 0):
        raise ConfigError("wavelengths must be positive")

    values = joint_in_frequency(fmap, TWO_PI_C / lam_a, TWO_PI_C / lam_b)

    if jacobian:
        values = values * (TWO_PI_C / lam_a[:, None] ** 2) \
            * (TWO_PI_C / lam_b[None, :] ** 2)
    scale = 1.0
    if normalize:
        peak = values.max()
        if peak <= 0:
            raise NumericError("resampled spectrum has no positive values")
        scale = 1.0 / peak
        values = values * scale
    return WavelengthSpectrum(
        lambda_a_m=lam_a,
        lambda_b_m=lam_b,
        values=values,
        meta={
            "jacobian": bool(jacobian),
            "normalize": bool(normalize),
            "scale": float(scale),
            "theta_rad": float(fmap.theta_rad),
        },
    )


@dataclass(frozen=True)
class CrossSection:
    """One-dimensional cut through the joint island with uncertainties."""

    kind: str
    const_omega: float
    omega_a: np.ndarray
    lambda_a_m: np.ndarray
    values: np.ndarray
    sigma: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)


def _island_peak(fmap: FrequencyMap) -> Tuple[float, float]:
    """Frequency of the strongest ++ island bin.

    The planner's protected island box is preferred when the plan records
    it, because on a rotated scan the folded single-arm lines also live in
    the positive-frequency quadrant and dwarf the island.
    """
    meta = fmap.source.plan.meta
    mag = np.abs(fmap.values)
    keys = ("omega_u0", "island_half_u", "island_half_v")
    if all(key in meta for key in keys):
        uu, vv = np.meshgrid(fmap.omega_u, fmap.omega_v, indexing="ij")
        box = (np.abs(uu - meta["omega_u0"]) <= meta["island_half_u"]) \
            & (np.abs(vv) <= meta["island_half_v"])
        masked = np.where(box, mag, -1.0)
    else:
        terms = extract_terms(fmap)
        masked = np.where(terms.masks.joint_pp, mag, -1.0)
    i, j = np.unravel_index(np.argmax(masked), masked.shape)
    if masked[i, j] <= 0:
        raise NumericError("no positive joint island found")
    wu, wv = fmap.omega_u[i], fmap.omega_v[j]
    ct, st = np.cos(fmap.theta_rad), np.sin(fmap.theta_rad)
    return wu * ct - wv * st, wu * st + wv * ct


def cross_section(fmap: FrequencyMap, kind: str = "sum",
                  n_points: int = 201, const_omega: float = None,
                  omega_a=None) -> CrossSection:
    """Cut along a line of constant summed (or differenced) frequency.

    By default the line passes through the maximum of the joint island;
    passing `const_omega` (and optionally the `omega_a` sample points)
    pins the line instead, which keeps repeated noisy reconstructions of
    one scenario on identical abscissae. Uncertainties come from exact
    linear propagation of Poisson count variances through detrending,
    windowing, the transform and the bilinear read-out, then through the
    magnitude at the interpolated phase.
    """
    if kind not in ("sum", "difference"):
        raise ConfigError(f"unknown cross-section kind {kind!r}")
    if n_points < 2:
        raise ConfigError("cross-section needs at least 2 points")
    peak_a, peak_b = _island_peak(fmap)
    if const_omega is None:
        const = peak_a + peak_b if kind == "sum" else peak_a - peak_b
    else:
        const = float(const_omega)
    if omega_a is not None:
        omega_a = np.asarray(omega_a, dtype=float)
        omega_b = const - omega_a if kind == "sum" else omega_a - const
        values, sigma = _line_readout(fmap, omega_a, omega_b)
        return CrossSection(
            kind=kind, const_omega=float(const), omega_a=omega_a,
            lambda_a_m=TWO_PI_C / omega_a, values=values, sigma=sigma,
            meta={
                "peak_omega_a": float(peak_a),
                "peak_omega_b": float(peak_b),
                "window": fmap.meta.get("window", "?"),
                "detrended": bool(fmap.detrended),
            },
        )

    # admissible omega_a range: the island neighbourhood when the plan
    # recorded its design extents, otherwise anything inside the plane
    ct, st = np.cos(fmap.theta_rad), np.sin(fmap.theta_rad)
    plan_meta = fmap.source.plan.meta
    slope = ct + st
    if "island_half_u" in plan_meta and "island_half_v" in plan_meta \
            and slope > 0:
        key = "island_half_v" if kind == "sum" else "island_half_u"
        span = 1.2 * float(plan_meta[key]) / slope
        trial_a = np.linspace(peak_a - span, peak_a + span, 4097)
    else:
        trial_a = np.linspace(0.2 * peak_a, 2.5 * peak_a, 4097)
    trial_b = const - trial_a if kind == "sum" else trial_a - const
    wu = trial_a * ct + trial_b * st
    wv = -trial_a * st + trial_b * ct
    ok = (
        (trial_b > 0)
        & (wu >= fmap.omega_u[0]) & (wu <= fmap.omega_u[-1])
        & (wv >= fmap.omega_v[0]) & (wv <= fmap.omega_v[-1])
    )
    if not np.any(ok):
        raise NumericError("cross-section line misses the sampled plane")
    # contiguous admissible run containing the island peak
    idx = np.flatnonzero(ok)
    near = idx[np.argmin(np.abs(trial_a[idx] - peak_a))]
    lo = near
    while lo - 1 in idx:
        lo -= 1
    hi = near
    while hi + 1 in idx:
        hi += 1
    omega_a = np.linspace(trial_a[lo], trial_a[hi], n_points)
    omega_b = const - omega_a if kind == "sum" else omega_a - const

    values, sigma = _line_readout(fmap, omega_a, omega_b)
    return CrossSection(
        kind=kind,
        const_omega=float(const),
        omega_a=omega_a,
        lambda_a_m=TWO_PI_C / omega_a,
        values=values,
        sigma=sigma,
        meta={
            "peak_omega_a": float(peak_a),
            "peak_omega_b": float(peak_b),
            "window": fmap.meta.get("window", "?"),
            "detrended": bool(fmap.detrended),
        },
    )


def _line_readout(fmap: FrequencyMap, omega_a, omega_b):
    """Bilinear values 4|F| along a frequency line, with Poisson sigmas.

    The transform reads whatever lattice produced the map (counts or fit
    residuals); the variance always comes from the raw counts, which a
    residual lattice carries in its metadata.
    """
    plan = fmap.source.plan
    counts = np.asarray(fmap.source.values, dtype=float)
    variance = np.asarray(
        fmap.source.meta.get("variance_counts", counts), dtype=float)
    variance = np.clip(variance, 0.0, None)
    ct, st = np.cos(fmap.theta_rad), np.sin(fmap.theta_rad)
    wu = omega_a * ct + omega_b * st
    wv = -omega_a * st + omega_b * ct
    iu, fu = _bilinear_indices(fmap.omega_u, wu, "cross-section")
    jv, fv = _bilinear_indices(fmap.omega_v, wv, "cross-section")

    u_del = plan.u_delays
    v_del = plan.v_delays
    n_tot = counts.size

    values = np.empty(omega_a.size)
    sigma = np.empty(omega_a.size)
    for m in range(omega_a.size):
        cu = np.array([1.0 - fu[m], fu[m]])
        cv = np.array([1.0 - fv[m], fv[m]])
        # per-sample transform kernels of the two u and two v bin rows
        psi_u = fmap.window_u * np.exp(
            1j * np.outer(fmap.omega_u[iu[m]:iu[m] + 2], u_del))
        psi_v = fmap.window_v * np.exp(
            1j * np.outer(fmap.omega_v[jv[m]:jv[m] + 2], v_del))
        f_bins = (psi_u @ counts) @ psi_v.T  # 2x2 neighbourhood of F
        if fmap.detrended:
            f_bins = f_bins - np.outer(psi_u.sum(axis=1), psi_v.sum(axis=1)) \
                * counts.mean()
        f_interp = cu @ f_bins @ cv
        value = 4.0 * np.abs(f_interp)
        values[m] = value
        if value == 0.0:
            sigma[m] = 0.0
            continue
        phase = f_interp / np.abs(f_interp)
        # the interpolation weights factor per axis, so the combined linear
        # kernel of the read-out is rank one (plus the detrend offset)
        ku = cu @ psi_u
        kv = cv @ psi_v
        offset = ku.sum() * kv.sum() / n_tot if fmap.detrended else 0.0
        grad = (np.conj(phase) * (ku[:, None] * kv[None, :] - offset)).real
        sigma[m] = 4.0 * np.sqrt(float(np.sum(grad * grad * variance)))
    return values, sigma
