"""Self-describing text files for 2D grids, plus CSV and graymap export.

One format carries every pipeline artifact: a magic line, the grid kind,
the value dtype and shape, two axis blocks (name, unit, coordinates), a
metadata section of key=value string pairs, then the values row by row as
decimal text. All numbers are written with 17 significant digits, which
round-trips IEEE double exactly, so write -> read is lossless and reruns
can be compared byte for byte. Metadata values survive verbatim.

The CSV export mirrors the values with axis coordinates in the first row
and column. Heatmaps are 8-bit binary portable graymaps scaled linearly
from zero to the grid maximum, one pixel per grid cell, chosen so that
images from identical runs are byte-identical too.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .errors import ConfigError, NumericError
from .interferometer import Interferogram, ScanPlan
from .reconstruction import FrequencyMap, WavelengthSpectrum
from .spdc import FrequencyGrid, JointSpectrum

MAGIC = "PAIRSPEC-GRID"
VERSION = 1

# full round-trip precision for IEEE double
_FMT = "%.17g"

# ScanPlan design metadata worth carrying through files: these let a
# reconstruction rebuild the planner's view of the source
_PLAN_META_FLOATS = (
    "center_omega_a", "center_omega_b", "bandwidth_a", "bandwidth_b",
    "oversampling", "guard_bins", "omega_u0", "island_half_u",
    "island_half_v", "moment_var_a", "moment_var_b", "moment_cov",
)


def fmt_float(x: float) -> str:
    """Canonical decimal text for one double (17 significant digits)."""
    return _FMT % float(x)


@dataclass(frozen=True)
class Axis:
    """One grid axis: physical name, unit string, coordinate values."""

    name: str
    unit: str
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ConfigError("axis needs a 1D coordinate array (>= 2 points)")
        if not np.all(np.isfinite(values)):
            raise NumericError("axis coordinates must be finite")
        for token in (self.name, self.unit):
            if not token or any(c.isspace() for c in token):
                raise ConfigError(
                    f"axis name/unit must be non-empty single tokens, "
                    f"got {token!r}")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Grid:
    """A 2D array with named axes and string metadata."""

    kind: str
    axis_a: Axis
    axis_b: Axis
    values: np.ndarray
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values)
        if np.iscomplexobj(values):
            values = values.astype(np.complex128)
        else:
            values = values.astype(np.float64)
        if values.shape != (self.axis_a.values.size, self.axis_b.values.size):
            raise ConfigError(
                f"values shape {values.shape} does not match axes "
                f"({self.axis_a.values.size}, {self.axis_b.values.size})")
        if not np.all(np.isfinite(values)):
            raise NumericError("grid values must be finite")
        if not self.kind or any(c.isspace() for c in self.kind):
            raise ConfigError(f"grid kind must be a single token, "
                              f"got {self.kind!r}")
        for key, value in self.meta.items():
            if not key or any(c.isspace() for c in key):
                raise ConfigError(f"metadata key must be a single token, "
                                  f"got {key!r}")
            if "\n" in str(value):
                raise ConfigError(f"metadata value for {key!r} must be "
                                  f"a single line")
        object.__setattr__(self, "values", values)
        object.__setattr__(
            self, "meta", {str(k): str(v) for k, v in self.meta.items()})


def _format_value(x) -> str:
    if np.iscomplexobj(x):
        return (_FMT % x.real) + ("%+.17g" % x.imag) + "j"
    return _FMT % x


def write_grid(path, grid: Grid) -> None:
    """Serialize a grid to the self-describing text format."""
    is_complex = np.iscomplexobj(grid.values)
    lines = [
        f"{MAGIC} {VERSION}",
        f"kind {grid.kind}",
        f"dtype {'complex' if is_complex else 'float'}",
        f"shape {grid.values.shape[0]} {grid.values.shape[1]}",
    ]
    for label, axis in (("a", grid.axis_a), ("b", grid.axis_b)):
        lines.append(f"axis {label} {axis.name} {axis.unit} "
                     f"{axis.values.size}")
        lines.append(" ".join(_FMT % v for v in axis.values))
    for key in sorted(grid.meta):
        lines.append(f"meta {key}={grid.meta[key]}")
    lines.append("data")
    for row in grid.values:
        lines.append(" ".join(_format_value(v) for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def _parse_axis(header_line: str, value_line: str, label: str) -> Axis:
    parts = header_line.split()
    if len(parts) != 5 or parts[0] != "axis" or parts[1] != label:
        raise ConfigError(f"malformed axis header: {header_line!r}")
    count = int(parts[4])
    values = np.array([float(tok) for tok in value_line.split()])
    if values.size != count:
        raise ConfigError(
            f"axis {label} declares {count} points but carries {values.size}")
    return Axis(name=parts[2], unit=parts[3], values=values)


def read_grid(path) -> Grid:
    """Parse a grid file; raises ConfigError on any format violation."""
    with open(path, "r", encoding="ascii") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0].split() != [MAGIC, str(VERSION)]:
        raise ConfigError(
            f"not a {MAGIC} {VERSION} file: {str(path)!r}")

    pos = 1

    def take(prefix):
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(prefix + " "):
            found = lines[pos] if pos < len(lines) else "<end of file>"
            raise ConfigError(f"expected {prefix!r} line, found {found!r}")
        value = lines[pos][len(prefix) + 1:]
        pos += 1
        return value

    kind = take("kind").strip()
    dtype = take("dtype").strip()
    if dtype not in ("float", "complex"):
        raise ConfigError(f"unknown dtype {dtype!r}")
    shape_tokens = take("shape").split()
    if len(shape_tokens) != 2:
        raise ConfigError("shape line must carry two integers")
    n_a, n_b = (int(t) for t in shape_tokens)

    axes = []
    for label in ("a", "b"):
        if pos + 1 >= len(lines):
            raise ConfigError(f"axis {label} block missing")
        axes.append(_parse_axis(lines[pos], lines[pos + 1], label))
        pos += 2

    meta = {}
    while pos < len(lines) and lines[pos].startswith("meta "):
        body = lines[pos][5:]
        if "=" not in body:
            raise ConfigError(f"malformed meta line: {lines[pos]!r}")
        key, value = body.split("=", 1)
        if key in meta:
            raise ConfigError(f"duplicate meta key {key!r}")
        meta[key] = value
        pos += 1

    if pos >= len(lines) or lines[pos] != "data":
        raise ConfigError("data section missing")
    pos += 1
    rows = lines[pos:]
    if len(rows) != n_a:
        raise ConfigError(f"expected {n_a} data rows, found {len(rows)}")
    caster = complex if dtype == "complex" else float
    out = np.empty((n_a, n_b), dtype=np.complex128 if dtype == "complex"
                   else np.float64)
    for i, row in enumerate(rows):
        tokens = row.split()
        if len(tokens) != n_b:
            raise ConfigError(
                f"data row {i} carries {len(tokens)} values, expected {n_b}")
        out[i] = [caster(tok) for tok in tokens]
    return Grid(kind=kind, axis_a=axes[0], axis_b=axes[1], values=out,
                meta=meta)


def write_csv(path, grid: Grid, digest: str = None) -> None:
    """Companion CSV: axis coordinates in the first row and column.

    Complex grids export their magnitude. A config digest, when given, is
    stored in the corner cell so the provenance travels with the table.
    """
    values = np.abs(grid.values) if np.iscomplexobj(grid.values) \
        else grid.values
    corner = f"config_digest:{digest}" if digest else ""
    lines = [",".join([corner] + [_FMT % b for b in grid.axis_b.values])]
    for a_value, row in zip(grid.axis_a.values, values):
        lines.append(",".join([_FMT % a_value] + [_FMT % v for v in row]))
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def write_pgm(path, values, comments=()) -> None:
    """8-bit binary portable graymap, scaled linearly from 0 to the max.

    One pixel per grid cell: width is the second axis, height the first.
    Negative values clip to black; an all-nonpositive grid is all black.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ConfigError("heatmap needs a 2D array")
    if not np.all(np.isfinite(values)):
        raise NumericError("heatmap values must be finite")
    top = float(values.max())
    if top > 0:
        scaled = np.clip(values, 0.0, None) * (255.0 / top)
        pixels = np.floor(scaled + 0.5).astype(np.uint8)
    else:
        pixels = np.zeros(values.shape, dtype=np.uint8)
    header = ["P5"]
    for comment in comments:
        if "\n" in comment:
            raise ConfigError("graymap comments must be single lines")
        header.append(f"# {comment}")
    header.append(f"{values.shape[1]} {values.shape[0]}")
    header.append("255")
    with open(path, "wb") as handle:
        handle.write(("\n".join(header) + "\n").encode("ascii"))
        handle.write(pixels.tobytes())


# converters between grid files and the pipeline's dataclasses ------------


def from_joint_spectrum(spectrum: JointSpectrum, meta=None) -> Grid:
    return Grid(
        kind="joint_spectrum",
        axis_a=Axis("omega_a", "rad/s", spectrum.grid.omega_a),
        axis_b=Axis("omega_b", "rad/s", spectrum.grid.omega_b),
        values=spectrum.values,
        meta=dict(meta or {}))


def to_joint_spectrum(grid: Grid) -> JointSpectrum:
    if grid.kind != "joint_spectrum":
        raise ConfigError(
            f"expected a joint_spectrum grid, got kind {grid.kind!r}")
    return JointSpectrum(
        grid=FrequencyGrid(omega_a=grid.axis_a.values,
                           omega_b=grid.axis_b.values),
        values=np.real(grid.values))


def from_interferogram(interferogram: Interferogram, meta=None) -> Grid:
    plan = interferogram.plan
    stored = {
        "interferogram_kind": interferogram.kind,
        "dwell_s": fmt_float(interferogram.dwell_s),
        "theta_rad": fmt_float(plan.theta_rad),
        "step_u_s": fmt_float(plan.step_u_s),
        "step_v_s": fmt_float(plan.step_v_s),
        "origin_u": str(plan.n_u // 2),
        "origin_v": str(plan.n_v // 2),
    }
    for key in _PLAN_META_FLOATS:
        if key in plan.meta:
            stored[f"plan_{key}"] = fmt_float(plan.meta[key])
    if "resolution_fraction" in plan.meta:
        stored["plan_resolution_fraction"] = \
            str(int(plan.meta["resolution_fraction"]))
    for key in ("pair_rate_scale_hz", "dark_rate_hz", "visibility",
                "rng_seed"):
        value = interferogram.meta.get(key)
        if value is not None:
            stored[f"detection_{key}"] = fmt_float(value) \
                if isinstance(value, float) else str(value)
    stored.update(meta or {})
    return Grid(
        kind="interferogram",
        axis_a=Axis("tau_u", "s", plan.u_delays),
        axis_b=Axis("tau_v", "s", plan.v_delays),
        values=interferogram.values,
        meta=stored)


def to_interferogram(grid: Grid) -> Interferogram:
    if grid.kind != "interferogram":
        raise ConfigError(
            f"expected an interferogram grid, got kind {grid.kind!r}")
    meta = grid.meta
    for key in ("interferogram_kind", "dwell_s", "theta_rad",
                "step_u_s", "step_v_s"):
        if key not in meta:
            raise ConfigError(f"interferogram file lacks meta key {key!r}")
    plan_meta = {}
    for key in _PLAN_META_FLOATS:
        stored = meta.get(f"plan_{key}")
        if stored is not None:
            plan_meta[key] = float(stored)
    if "plan_resolution_fraction" in meta:
        plan_meta["resolution_fraction"] = \
            int(meta["plan_resolution_fraction"])
    plan = ScanPlan(
        theta_rad=float(meta["theta_rad"]),
        step_u_s=float(meta["step_u_s"]),
        step_v_s=float(meta["step_v_s"]),
        n_u=grid.axis_a.values.size,
        n_v=grid.axis_b.values.size,
        meta=plan_meta)
    detection = {key[len("detection_"):]: value
                 for key, value in meta.items()
                 if key.startswith("detection_")}
    for key in ("pair_rate_scale_hz", "dark_rate_hz", "visibility"):
        if key in detection:
            detection[key] = float(detection[key])
    if "rng_seed" in detection:
        detection["rng_seed"] = int(detection["rng_seed"])
    return Interferogram(
        plan=plan,
        values=np.real(grid.values),
        kind=meta["interferogram_kind"],
        dwell_s=float(meta["dwell_s"]),
        meta=detection)


def from_frequency_map(fmap: FrequencyMap, meta=None) -> Grid:
    stored = {
        "theta_rad": fmt_float(fmap.theta_rad),
        "window": fmap.meta.get("window", "?"),
        "detrended": "true" if fmap.detrended else "false",
    }
    stored.update(meta or {})
    return Grid(
        kind="frequency_map",
        axis_a=Axis("omega_u", "rad/s", fmap.omega_u),
        axis_b=Axis("omega_v", "rad/s", fmap.omega_v),
        values=fmap.values,
        meta=stored)


def from_wavelength_spectrum(spectrum: WavelengthSpectrum,
                             meta=None) -> Grid:
    stored = {key: fmt_float(value) if isinstance(value, float)
              else str(value) for key, value in spectrum.meta.items()}
    stored.update(meta or {})
    return Grid(
        kind="wavelength_spectrum",
        axis_a=Axis("lambda_a", "m", spectrum.lambda_a_m),
        axis_b=Axis("lambda_b", "m", spectrum.lambda_b_m),
        values=spectrum.values,
        meta=stored)
