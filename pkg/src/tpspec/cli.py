"""Command-line front end: ``tpspec <command> --config run.toml``.

Commands
--------
spectrum   filtered one-photon spectrum over the grid axis
g2tau      delay trace for a pair of filters (cross, recombined or unfiltered)
tps        two-photon spectrum map g2(nu1, nu2, 0)
csmap      Cauchy-Schwarz ratio map
dressed    dressed-state coefficients and Mollow line positions
validate   time-domain oracle against the sensor method at catalog points

Settings are merged in the order config file < ``TPSPEC_*`` environment
variables < command-line flags.

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical failure
(non-convergence, too many masked points, failed validation), 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import plots
from .config import RunConfig, apply_overrides, config_from_dict, config_to_dict, env_overrides, load_config
from .correlations import FilterSpec, filtered_g2, filtered_g2_zero, filtered_spectrum, recombined_sideband_g2
from .emitter import dressed_states, mollow_peaks, unfiltered_g2
from .errors import ConfigError, ConvergenceError, ResolutionError, TpsError
from .maps import MapGrid, MapOptions, PointError, cs_map, tps_map
from .oracle import OracleConfig, direct_g2_zero
from .output import dump_json, tool_version, write_outputs
from .postprocess import convolve_irf, diffused_g2, diffused_spectrum

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
VALIDATION_TOLERANCE = 0.05


class ValidationFailed(TpsError):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--workers", type=int, help="worker processes for sweeps")
    common.add_argument("--irf", type=float, metavar="PS", help="detector response FWHM in ps (0 disables)")
    common.add_argument("--diffusion", type=float, metavar="GHZ", help="spectral diffusion FWHM in GHz (0 disables)")
    common.add_argument("--grid", type=int, metavar="N", help="points per frequency axis")
    common.add_argument("--range", type=float, metavar="GHZ", help="half-width of each frequency axis")
    common.add_argument("--no-plots", action="store_true", default=None, help="skip gnuplot scripts")
    common.add_argument("--rabi", type=float, metavar="GHZ", help="override emitter.rabi_ghz")
    common.add_argument("--detuning", type=float, metavar="GHZ", help="override emitter.detuning_ghz")
    common.add_argument("--kappa", type=float, metavar="GHZ", help="override emitter.kappa_ghz")

    parser = argparse.ArgumentParser(prog="tpspec", description="Frequency-filtered photon correlations of a driven two-level emitter.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("spectrum", "filtered one-photon spectrum"),
        ("g2tau", "delay-resolved filtered correlation"),
        ("tps", "two-photon spectrum map"),
        ("csmap", "Cauchy-Schwarz ratio map"),
        ("dressed", "dressed-state coefficients"),
        ("validate", "oracle check of the sensor method"),
    ):
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.rabi is not None:
        cfg = config_from_dict({"emitter": {"rabi_ghz": args.rabi}})
    else:
        raise ConfigError("either --config or --rabi is required")
    cfg = apply_overrides(cfg, **env_overrides(environ))
    return apply_overrides(
        cfg,
        out=args.out,
        workers=args.workers,
        irf=args.irf,
        diffusion=args.diffusion,
        grid=args.grid,
        range=args.range,
        no_plots=args.no_plots,
        rabi=args.rabi,
        detuning=args.detuning,
        kappa=args.kappa,
    )


def _progress(done, total):
    if sys.stderr.isatty():
        print(f"\r{done}/{total} points", end="" if done < total else "\n", file=sys.stderr)


def _provenance(command, cfg, start):
    return {"command": command, "config": config_to_dict(cfg), "wall_time_s": time.perf_counter() - start}


def _tau_grid(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.tau.min_ns, cfg.tau.max_ns, cfg.tau.n_points)


def _two_filters(cfg, params):
    if len(cfg.filters) != 2:
        raise ConfigError(f"filters: g2tau mode '{cfg.g2tau.mode}' needs exactly two filters, got {len(cfg.filters)}")
    return cfg.filters[0].resolve(params), cfg.filters[1].resolve(params)


def run_spectrum(cfg: RunConfig, start: float) -> list[Path]:
    params = cfg.emitter
    half = cfg.grid.half_range(params)
    nu = np.linspace(-half, half, cfg.grid.n_points)
    diffusion = cfg.post.diffusion
    if diffusion is None:
        spec = filtered_spectrum(params, cfg.bandwidth_ghz, nu, cfg.sensor)
    else:
        spec = diffused_spectrum(params, cfg.bandwidth_ghz, nu, diffusion, cfg.sensor, cfg.workers)
    out = Path(cfg.output.directory)
    written = write_outputs(spec, out, "spectrum", cfg.output.formats, _provenance("spectrum", cfg, start))
    if cfg.output.emit_plots:
        written.append(plots.write_script(out / "spectrum.gp", plots.spectrum_script("spectrum.csv", "spectrum.png")))
    return written


def _g2tau_trace(cfg: RunConfig, params, taus):
    mode = cfg.g2tau.mode
    if mode == "unfiltered":
        trace = unfiltered_g2(params, taus)
    else:
        f1, f2 = _two_filters(cfg, params)
        diffusion = cfg.post.diffusion
        if mode == "recombined":
            if diffusion is not None:
                raise ConfigError("post.diffusion_width_ghz: diffusion is not supported for g2tau mode 'recombined'")
            trace = recombined_sideband_g2(params, f1, f2, taus, cfg.sensor, cfg.g2tau.phase)
        elif diffusion is not None:
            trace = diffused_g2(params, f1, f2, taus, diffusion, cfg.sensor, cfg.workers)
        else:
            trace = filtered_g2(params, f1, f2, taus, cfg.sensor)
    if cfg.post.irf is not None:
        trace = convolve_irf(trace, cfg.post.irf)
    return trace


def run_g2tau(cfg: RunConfig, start: float) -> list[Path]:
    taus = _tau_grid(cfg)
    detunings = cfg.g2tau.detunings_ghz or (cfg.emitter.detuning_ghz,)
    out = Path(cfg.output.directory)
    written, names, labels = [], [], []
    for k, det in enumerate(detunings):
        params = cfg.emitter.with_detuning(det)
        trace = _g2tau_trace(cfg, params, taus)
        stem = "g2tau" if len(detunings) == 1 else f"g2tau_{k:02d}"
        prov = _provenance("g2tau", cfg, start)
        prov["mode"] = cfg.g2tau.mode
        prov["detuning_ghz"] = det
        written += write_outputs(trace, out, stem, cfg.output.formats, prov)
        names.append(f"{stem}.csv")
        labels.append(f"{det:+.3g} GHz")
    if cfg.output.emit_plots:
        written.append(plots.write_script(out / "g2tau.gp", plots.trace_script(names, labels, "g2tau.png")))
    return written


def run_map(cfg: RunConfig, start: float, kind: str) -> list[Path]:
    params = cfg.emitter
    half = cfg.grid.half_range(params)
    grid = MapGrid.square(cfg.grid.n_points, half)
    options = MapOptions(
        irf=cfg.post.irf,
        diffusion=cfg.post.diffusion,
        sensor=cfg.sensor,
        workers=cfg.workers,
        progress=_progress,
    )
    result = (tps_map if kind == "tps" else cs_map)(params, cfg.bandwidth_ghz, grid, options)
    out = Path(cfg.output.directory)
    written = write_outputs(result, out, kind, cfg.output.formats, _provenance(kind, cfg, start))
    if cfg.output.emit_plots:
        script = plots.map_script(f"{kind}.csv", result.kind, params, half, f"{kind}.png")
        written.append(plots.write_script(out / f"{kind}.gp", script))
    return written


def run_dressed(cfg: RunConfig, start: float) -> list[Path]:
    ds = dressed_states(cfg.emitter)
    red, mid, blue = mollow_peaks(cfg.emitter)
    info = {
        "c": ds.c,
        "s": ds.s,
        "omega_prime_ghz": ds.omega_prime_ghz,
        "mollow_peaks_ghz": [red, mid, blue],
    }
    for key, val in info.items():
        print(f"{key} = {val}")
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    dump_json({**info, **_provenance("dressed", cfg, start), "version": tool_version()}, out / "dressed.json")
    return [out / "dressed.json"]


def validation_points(cfg: RunConfig) -> list[tuple[float, float]]:
    """Catalog-style filter pairs used by ``validate`` (six points)."""
    om = cfg.emitter.generalized_rabi_ghz
    return [(om, om), (om, -om), (0.0, 0.0), (0.5 * om, 0.5 * om), (0.0, om), (0.5 * om, -0.5 * om)]


def run_validate(cfg: RunConfig, start: float) -> list[Path]:
    params = cfg.emitter
    rows = {k: [] for k in ("nu1_ghz", "nu2_ghz", "sensor_g2", "oracle_g2", "relative_difference")}
    for nu1, nu2 in validation_points(cfg):
        f1, f2 = FilterSpec(nu1, cfg.bandwidth_ghz), FilterSpec(nu2, cfg.bandwidth_ghz)
        sensor = filtered_g2_zero(params, f1, f2, cfg.sensor)
        oracle = direct_g2_zero(params, f1, f2, OracleConfig.for_point(params, f1, f2))
        rel = abs(sensor - oracle) / abs(oracle)
        for key, val in zip(rows, (nu1, nu2, sensor, oracle, rel)):
            rows[key].append(val)
        status = "ok" if rel <= VALIDATION_TOLERANCE else "DISAGREE"
        print(f"({nu1:+.4g}, {nu2:+.4g}) GHz  sensor {sensor:.6g}  oracle {oracle:.6g}  rel {rel:.2e}  {status}")
    worst = max(rows["relative_difference"])
    prov = _provenance("validate", cfg, start)
    prov["tolerance"] = VALIDATION_TOLERANCE
    prov["max_relative_difference"] = worst
    written = write_outputs({"columns": list(rows), "data": rows, "metadata": {}}, Path(cfg.output.directory), "validate", cfg.output.formats, prov)
    if worst > VALIDATION_TOLERANCE:
        raise ValidationFailed(f"largest disagreement {worst:.2%} exceeds {VALIDATION_TOLERANCE:.0%}")
    return written


COMMANDS = {
    "spectrum": run_spectrum,
    "g2tau": run_g2tau,
    "tps": lambda cfg, start: run_map(cfg, start, "tps"),
    "csmap": lambda cfg, start: run_map(cfg, start, "csmap"),
    "dressed": run_dressed,
    "validate": run_validate,
}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, PointError):
        return _exit_code(exc.cause)
    if isinstance(exc, (ConvergenceError, ValidationFailed)):
        return EXIT_NUMERIC
    if isinstance(exc, (ConfigError, ResolutionError, ValueError)):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_NUMERIC


def main(argv=None, environ=None) -> int:
    args = _parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = resolve_config(args, environ)
        written = COMMANDS[args.command](cfg, start)
    except (TpsError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"tpspec {args.command}: error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
