"""Command line entry points for the full pipeline.

Five subcommands cover the pipeline stages: ``simulate-jsa`` evaluates
the source model, ``synthesize`` turns a spectrum into a scanned count
lattice, ``reconstruct`` transforms a lattice back into spectra,
``cross-section`` cuts one line through the reconstruction, and
``bench`` runs the equal-time noise comparison. Each command reads one
flat config file (or the built-in defaults), writes self-describing text
artifacts stamped with the config digest, and is bitwise deterministic:
the same config always produces the same bytes.

Exit codes: 0 on success, 2 for configuration or input-file problems,
3 for numeric failures. Errors print one machine-parsable line on
stderr: ``pairspec-error: code=<n> kind=<ExceptionName> message="..."``.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import gridfile
from .bench import advantage_sweep, compare
from .config import default_config, dump_default_text, load_config
from .errors import ConfigError, PairspecError
from .gridfile import fmt_float
from .reconstruction import (
    cross_section,
    dft2,
    isolate_pair_interference,
    joint_in_wavelength,
)
from .spdc import joint_amplitude, joint_intensity
from .interferometer import synthesize


def build_parser() -> argparse.ArgumentParser:
    """The one source of truth for flags, defaults and help text."""
    parser = argparse.ArgumentParser(
        prog="pairspec",
        description="Simulate and reconstruct joint spectra of photon "
                    "pairs measured by coincidence Fourier spectroscopy.",
        epilog="Run with --dump-default-config to see every config key, "
               "its unit and its default. Exit codes: 0 success, "
               "2 config error, 3 numeric failure.")
    parser.add_argument(
        "--dump-default-config", action="store_true",
        help="print the complete default config file and exit")

    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, help_text):
        cmd = sub.add_parser(name, help=help_text, description=help_text)
        cmd.add_argument(
            "--config", metavar="FILE",
            help="config file (all keys required); defaults if omitted")
        return cmd

    cmd = add("simulate-jsa",
              "evaluate the source model on the configured grid")
    cmd.add_argument("--output", metavar="FILE",
                     help="joint-spectrum grid file "
                          "(default <output_dir>/jsa.grid)")

    cmd = add("synthesize",
              "simulate one delay scan of a joint spectrum")
    cmd.add_argument("--spectrum", metavar="FILE",
                     help="input joint-spectrum grid "
                          "(default <output_dir>/jsa.grid)")
    cmd.add_argument("--output", metavar="FILE",
                     help="interferogram grid file "
                          "(default <output_dir>/interferogram.grid)")

    cmd = add("reconstruct",
              "transform a count lattice into spectra and cuts")
    cmd.add_argument("--interferogram", metavar="FILE",
                     help="input interferogram grid "
                          "(default <output_dir>/interferogram.grid)")
    cmd.add_argument("--heatmap", action="store_true",
                     help="also write portable graymap images")

    cmd = add("cross-section",
              "cut the reconstruction along one spectral line")
    cmd.add_argument("--interferogram", metavar="FILE",
                     help="input interferogram grid "
                          "(default <output_dir>/interferogram.grid)")
    cmd.add_argument("--kind", choices=("sum", "difference"),
                     help="cut direction (default from config)")
    cmd.add_argument("--output", metavar="FILE",
                     help="CSV file (default <output_dir>/"
                          "cross_section_<kind>.csv)")

    cmd = add("bench",
              "equal-time noise comparison against a scanning "
              "spectrometer")
    cmd.add_argument("--output", metavar="FILE",
                     help="report file "
                          "(default <output_dir>/bench_report.txt)")
    cmd.add_argument("--sweep", action="store_true",
                     help="also compare across 16/32/64 pixel grids")

    return parser


def _resolve(cfg, explicit, default_name):
    if explicit:
        return explicit
    return os.path.join(cfg["output_dir"], default_name)


def _say(path):
    print(f"wrote {path}")


def _cmd_simulate_jsa(cfg, args) -> None:
    amplitude = joint_amplitude(
        cfg.crystal(), cfg.pump(), cfg.collection(), cfg.frequency_grid(),
        order=cfg["quadrature_order"], mode=cfg["quadrature_mode"],
        tolerance=cfg["quadrature_tolerance"], workers=cfg.workers())
    spectrum = joint_intensity(amplitude)
    out = _resolve(cfg, args.output, "jsa.grid")
    grid = gridfile.from_joint_spectrum(spectrum, meta={
        "config_digest": cfg.digest,
        "quadrature_mode": cfg["quadrature_mode"],
        "quadrature_order": str(cfg["quadrature_order"]),
    })
    gridfile.write_grid(out, grid)
    _say(out)
    csv = os.path.splitext(out)[0] + ".csv"
    gridfile.write_csv(csv, grid, digest=cfg.digest)
    _say(csv)


def _cmd_synthesize(cfg, args) -> None:
    spectrum_path = _resolve(cfg, args.spectrum, "jsa.grid")
    spectrum = gridfile.to_joint_spectrum(gridfile.read_grid(spectrum_path))
    plan = cfg.scan_plan(spectrum)
    interferogram = synthesize(spectrum, plan, cfg.detection(),
                               kind=cfg["synthesize_kind"])
    out = _resolve(cfg, args.output, "interferogram.grid")
    grid = gridfile.from_interferogram(interferogram, meta={
        "config_digest": cfg.digest,
        "source_spectrum_kind": "joint_spectrum",
    })
    gridfile.write_grid(out, grid)
    _say(out)


def _reconstruct_map(cfg, path):
    interferogram = gridfile.to_interferogram(gridfile.read_grid(path))
    work = interferogram
    if cfg["recon_isolate"]:
        work = isolate_pair_interference(interferogram)
    return dft2(work, window=cfg["recon_window"],
                detrend=cfg["recon_detrend"])


def _cmd_reconstruct(cfg, args) -> None:
    source = _resolve(cfg, args.interferogram, "interferogram.grid")
    fmap = _reconstruct_map(cfg, source)
    stamp = {"config_digest": cfg.digest}

    out_map = os.path.join(cfg["output_dir"], "frequency_map.grid")
    map_grid = gridfile.from_frequency_map(fmap, meta=stamp)
    gridfile.write_grid(out_map, map_grid)
    _say(out_map)

    lam_a, lam_b = cfg.wavelength_axes()
    spectrum = joint_in_wavelength(fmap, lam_a, lam_b)
    out_spec = os.path.join(cfg["output_dir"], "joint_wavelength.grid")
    spec_grid = gridfile.from_wavelength_spectrum(spectrum, meta=stamp)
    gridfile.write_grid(out_spec, spec_grid)
    _say(out_spec)
    out_csv = os.path.join(cfg["output_dir"], "joint_wavelength.csv")
    gridfile.write_csv(out_csv, spec_grid, digest=cfg.digest)
    _say(out_csv)

    for kind in ("sum", "difference"):
        cut = cross_section(fmap, kind=kind,
                            n_points=cfg["cross_section_points"])
        out_cut = os.path.join(cfg["output_dir"],
                               f"cross_section_{kind}.csv")
        _write_cross_section(out_cut, cut, cfg.digest)
        _say(out_cut)

    if args.heatmap:
        comments = [f"config_digest={cfg.digest}"]
        out_pgm = os.path.join(cfg["output_dir"], "joint_wavelength.pgm")
        gridfile.write_pgm(out_pgm, spectrum.values, comments=comments)
        _say(out_pgm)
        out_mag = os.path.join(cfg["output_dir"], "frequency_map.pgm")
        gridfile.write_pgm(out_mag, np.abs(fmap.values), comments=comments)
        _say(out_mag)


def _write_cross_section(path, cut, digest) -> None:
    lines = [
        f"# config_digest={digest}",
        f"# kind={cut.kind} const_omega_rad_per_s="
        f"{fmt_float(cut.const_omega)} abscissa=lambda_a_nm",
        "abscissa,value,sigma",
    ]
    for lam, value, sigma in zip(cut.lambda_a_m, cut.values, cut.sigma):
        lines.append(f"{fmt_float(lam * 1e9)},{fmt_float(value)},"
                     f"{fmt_float(sigma)}")
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def _cmd_cross_section(cfg, args) -> None:
    source = _resolve(cfg, args.interferogram, "interferogram.grid")
    fmap = _reconstruct_map(cfg, source)
    kind = args.kind or cfg["cross_section_kind"]
    cut = cross_section(fmap, kind=kind,
                        n_points=cfg["cross_section_points"])
    out = _resolve(cfg, args.output, f"cross_section_{kind}.csv")
    _write_cross_section(out, cut, cfg.digest)
    _say(out)


def _report_lines(report) -> list:
    n_a, n_b = report.bench.spectral_pixels
    lines = [
        f"pixels_a={n_a}",
        f"pixels_b={n_b}",
        f"plan_u={report.plan_shape[0]}",
        f"plan_v={report.plan_shape[1]}",
        f"dwell_s={fmt_float(report.dwell_s)}",
        f"trials={report.bench.trials}",
        f"median_mse_fourier={fmt_float(np.median(report.mse_fourier))}",
        f"median_mse_scanning={fmt_float(np.median(report.mse_scanning))}",
        f"advantage_ratio_median="
        f"{fmt_float(np.median(report.advantage_ratio))}",
        f"fourier_win_fraction={fmt_float(report.fourier_win_fraction)}",
        f"regime={report.regime}",
        f"dark_to_mean_signal={fmt_float(report.dark_to_mean_signal)}",
        f"advantage_claimed={str(report.advantage_claimed).lower()}",
    ]
    for name in sorted(report.flags):
        lines.append(f"flag_{name}={str(report.flags[name]).lower()}")
    for name, values in (("mse_fourier", report.mse_fourier),
                         ("mse_scanning", report.mse_scanning),
                         ("advantage_ratio", report.advantage_ratio)):
        lines.append(f"{name}=" + ",".join(fmt_float(v) for v in values))
    return lines


def _cmd_bench(cfg, args) -> None:
    spectrum = cfg.bench_spectrum()
    bench = cfg.bench()
    lines = [
        "pairspec-bench-report 1",
        f"config_digest={cfg.digest}",
        f"total_time_s={fmt_float(bench.total_time_s)}",
        f"pair_rate_scale_hz={fmt_float(bench.pair_rate_scale_hz)}",
        f"dark_coinc_rate_hz={fmt_float(bench.dark_coinc_rate_hz)}",
        f"rng_seed={bench.rng_seed}",
        "",
    ]
    if args.sweep:
        sweep = advantage_sweep(spectrum, bench)
        for report in sweep.reports:
            lines.extend(_report_lines(report))
            lines.append("")
        lines.append(
            f"monotone_ratio_fraction={fmt_float(sweep.monotone_fraction)}")
    else:
        lines.extend(_report_lines(compare(spectrum, bench)))
    out = _resolve(cfg, args.output, "bench_report.txt")
    with open(out, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
    _say(out)


_COMMANDS = {
    "simulate-jsa": _cmd_simulate_jsa,
    "synthesize": _cmd_synthesize,
    "reconstruct": _cmd_reconstruct,
    "cross-section": _cmd_cross_section,
    "bench": _cmd_bench,
}


def _error_line(code: int, exc: Exception) -> str:
    message = " ".join(str(exc).split()).replace('"', "'")
    return (f'pairspec-error: code={code} kind={type(exc).__name__} '
            f'message="{message}"')


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_default_config:
        sys.stdout.write(dump_default_text())
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        sys.stderr.write(_error_line(
            2, ConfigError("no command given")) + "\n")
        return 2
    try:
        cfg = load_config(args.config) if args.config else default_config()
        os.makedirs(cfg["output_dir"], exist_ok=True)
        _COMMANDS[args.command](cfg, args)
        return 0
    except ConfigError as exc:
        sys.stderr.write(_error_line(2, exc) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(_error_line(2, exc) + "\n")
        return 2
    except PairspecError as exc:
        sys.stderr.write(_error_line(3, exc) + "\n")
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
