"""Run configuration: strict TOML loading, validation and serialization.

Every frequency is nu = omega / 2 pi in GHz relative to the laser, times are
in ns and the detector response in ps.  Unknown keys are rejected.

Defaults
--------
bandwidth_ghz                 0.5
emitter.detuning_ghz          0.0
emitter.kappa_ghz             0.2
filters[].bandwidth_ghz       top-level bandwidth_ghz
grid.n_points                 101
grid.range_ghz                2 * emitter.rabi_ghz (half-width of each axis)
tau.min_ns, tau.max_ns        -5.0, 5.0
tau.n_points                  1001
post.irf_fwhm_ps              350.0 (0 disables)
post.diffusion_width_ghz      0.0 (disabled)
post.diffusion_samples        21
sensor.epsilon_sequence       min(Gamma) * 1e-3 * (1, 1/2, 1/4)
sensor.tolerance              1e-3
g2tau.mode                    "cross" (also "recombined", "unfiltered")
g2tau.phase                   0.0
g2tau.detunings_ghz           [emitter.detuning_ghz]
workers                       1
output.directory              "tpspec-out"
output.formats                ["csv"]
output.emit_plots             true
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import tomli
import tomli_w

from .correlations import FilterSpec, SensorConfig
from .emitter import EmitterParams, mollow_peaks
from .errors import ConfigError
from .postprocess import DiffusionSpec, IrfSpec

ENV_PREFIX = "TPSPEC_"
NAMED_CENTERS = ("red", "center", "blue")
G2TAU_MODES = ("cross", "recombined", "unfiltered")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class FilterEntry:
    """A filter whose centre may be a number or a named Mollow line."""

    center: float | str
    bandwidth_ghz: float

    def resolve(self, params: EmitterParams) -> FilterSpec:
        if isinstance(self.center, str):
            red, mid, blue = mollow_peaks(params)
            center = {"red": red, "center": mid, "blue": blue}[self.center]
        else:
            center = self.center
        return FilterSpec(center, self.bandwidth_ghz)


@dataclass(frozen=True)
class GridConfig:
    n_points: int = 101
    range_ghz: float | None = None

    def half_range(self, params: EmitterParams) -> float:
        return self.range_ghz if self.range_ghz is not None else 2.0 * params.rabi_ghz


@dataclass(frozen=True)
class TauConfig:
    min_ns: float = -5.0
    max_ns: float = 5.0
    n_points: int = 1001


@dataclass(frozen=True)
class PostConfig:
    irf_fwhm_ps: float = 350.0
    diffusion_width_ghz: float = 0.0
    diffusion_samples: int = 21

    @property
    def irf(self) -> IrfSpec | None:
        return IrfSpec(self.irf_fwhm_ps) if self.irf_fwhm_ps > 0 else None

    @property
    def diffusion(self) -> DiffusionSpec | None:
        if self.diffusion_width_ghz > 0:
            return DiffusionSpec(self.diffusion_width_ghz, self.diffusion_samples)
        return None


@dataclass(frozen=True)
class G2TauConfig:
    mode: str = "cross"
    phase: float = 0.0
    detunings_ghz: tuple[float, ...] | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "tpspec-out"
    formats: tuple[str, ...] = ("csv",)
    emit_plots: bool = True


@dataclass(frozen=True)
class RunConfig:
    emitter: EmitterParams
    bandwidth_ghz: float = 0.5
    filters: tuple[FilterEntry, ...] = ()
    grid: GridConfig = GridConfig()
    tau: TauConfig = TauConfig()
    post: PostConfig = PostConfig()
    sensor: SensorConfig = SensorConfig()
    g2tau: G2TauConfig = G2TauConfig()
    workers: int = 1
    output: OutputConfig = field(default_factory=OutputConfig)


# ---------------------------------------------------------------------------
# parsing helpers


def _number(value, path, *, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _section(raw, path, allowed):
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: expected a table, got {type(raw).__name__}")
    for key in raw:
        if key not in allowed:
            full = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown key '{full}' (allowed: {', '.join(sorted(allowed))})")
    return raw


def _check(cond, path, message):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _wrap(path, build):
    try:
        return build()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_from_dict(raw: Mapping[str, Any]) -> RunConfig:
    """Validate a nested mapping (as parsed from TOML) into a :class:`RunConfig`."""
    top = _section(raw, "", {"emitter", "bandwidth_ghz", "filters", "grid", "tau", "post", "sensor", "g2tau", "workers", "output"})
    if "emitter" not in top:
        raise ConfigError("emitter: section is required")
    em = _section(top["emitter"], "emitter", {"rabi_ghz", "detuning_ghz", "kappa_ghz"})
    _check("rabi_ghz" in em, "emitter.rabi_ghz", "is required")
    emitter = _wrap(
        "emitter",
        lambda: EmitterParams(
            _number(em["rabi_ghz"], "emitter.rabi_ghz"),
            _number(em.get("detuning_ghz", 0.0), "emitter.detuning_ghz"),
            _number(em.get("kappa_ghz", 0.2), "emitter.kappa_ghz"),
        ),
    )
    bandwidth = _number(top.get("bandwidth_ghz", 0.5), "bandwidth_ghz")
    _check(bandwidth > 0, "bandwidth_ghz", "must be > 0")

    raw_filters = top.get("filters", [])
    _check(isinstance(raw_filters, list), "filters", "expected an array of tables")
    _check(len(raw_filters) <= 2, "filters", f"at most two filters, got {len(raw_filters)}")
    filters = []
    for k, rf in enumerate(raw_filters):
        p = f"filters[{k}]"
        rf = _section(rf, p, {"center_ghz", "bandwidth_ghz"})
        _check("center_ghz" in rf, f"{p}.center_ghz", "is required")
        center = rf["center_ghz"]
        if isinstance(center, str):
            _check(center in NAMED_CENTERS, f"{p}.center_ghz", f"named centres are {NAMED_CENTERS}")
        else:
            center = _number(center, f"{p}.center_ghz")
        bw = _number(rf.get("bandwidth_ghz", bandwidth), f"{p}.bandwidth_ghz")
        _check(bw > 0, f"{p}.bandwidth_ghz", "must be > 0")
        filters.append(FilterEntry(center, bw))

    g = _section(top.get("grid", {}), "grid", {"n_points", "range_ghz"})
    grid = GridConfig(
        _number(g.get("n_points", 101), "grid.n_points", integer=True),
        None if "range_ghz" not in g else _number(g["range_ghz"], "grid.range_ghz"),
    )
    _check(grid.n_points >= 1, "grid.n_points", "must be >= 1")
    _check(grid.range_ghz is None or grid.range_ghz > 0, "grid.range_ghz", "must be > 0")
    _check(grid.range_ghz is not None or emitter.rabi_ghz > 0, "grid.range_ghz", "required when rabi_ghz is 0")

    t = _section(top.get("tau", {}), "tau", {"min_ns", "max_ns", "n_points"})
    tau = TauConfig(
        _number(t.get("min_ns", -5.0), "tau.min_ns"),
        _number(t.get("max_ns", 5.0), "tau.max_ns"),
        _number(t.get("n_points", 601), "tau.n_points", integer=True),
    )
    _check(tau.max_ns > tau.min_ns, "tau.max_ns", "must exceed tau.min_ns")
    _check(tau.n_points >= 2, "tau.n_points", "must be >= 2")

    pp = _section(top.get("post", {}), "post", {"irf_fwhm_ps", "diffusion_width_ghz", "diffusion_samples"})
    post = PostConfig(
        _number(pp.get("irf_fwhm_ps", 350.0), "post.irf_fwhm_ps"),
        _number(pp.get("diffusion_width_ghz", 0.0), "post.diffusion_width_ghz"),
        _number(pp.get("diffusion_samples", 21), "post.diffusion_samples", integer=True),
    )
    _check(post.irf_fwhm_ps >= 0, "post.irf_fwhm_ps", "must be >= 0 (0 disables)")
    _check(post.diffusion_width_ghz >= 0, "post.diffusion_width_ghz", "must be >= 0 (0 disables)")
    _wrap("post.diffusion_samples", lambda: DiffusionSpec(1.0, post.diffusion_samples))

    s = _section(top.get("sensor", {}), "sensor", {"epsilon_sequence", "tolerance"})
    seq = s.get("epsilon_sequence")
    if seq is not None:
        _check(isinstance(seq, list), "sensor.epsilon_sequence", "expected an array")
        seq = tuple(_number(e, "sensor.epsilon_sequence") for e in seq)
    sensor = _wrap("sensor", lambda: SensorConfig(seq, _number(s.get("tolerance", 1e-3), "sensor.tolerance")))

    gt = _section(top.get("g2tau", {}), "g2tau", {"mode", "phase", "detunings_ghz"})
    mode = gt.get("mode", "cross")
    _check(mode in G2TAU_MODES, "g2tau.mode", f"must be one of {G2TAU_MODES}")
    dets = gt.get("detunings_ghz")
    if dets is not None:
        _check(isinstance(dets, list) and dets, "g2tau.detunings_ghz", "expected a nonempty array")
        dets = tuple(_number(d, "g2tau.detunings_ghz") for d in dets)
    g2tau = G2TauConfig(mode, _number(gt.get("phase", 0.0), "g2tau.phase"), dets)

    workers = _number(top.get("workers", 1), "workers", integer=True)
    _check(workers >= 1, "workers", "must be >= 1")

    o = _section(top.get("output", {}), "output", {"directory", "formats", "emit_plots"})
    directory = o.get("directory", "tpspec-out")
    _check(isinstance(directory, str) and directory, "output.directory", "expected a nonempty string")
    formats = o.get("formats", ["csv"])
    _check(isinstance(formats, list) and formats, "output.formats", "expected a nonempty array")
    for f in formats:
        _check(f in FORMATS, "output.formats", f"unknown format {f!r}; choose from {FORMATS}")
    emit = o.get("emit_plots", True)
    _check(isinstance(emit, bool), "output.emit_plots", "expected true or false")
    output = OutputConfig(directory, tuple(dict.fromkeys(formats)), emit)

    return RunConfig(emitter, bandwidth, tuple(filters), grid, tau, post, sensor, g2tau, workers, output)


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain nested mapping with every default written out (``None`` omitted)."""
    out: dict[str, Any] = {
        "bandwidth_ghz": cfg.bandwidth_ghz,
        "workers": cfg.workers,
        "emitter": dataclasses.asdict(cfg.emitter),
        "filters": [{"center_ghz": f.center, "bandwidth_ghz": f.bandwidth_ghz} for f in cfg.filters],
        "grid": {"n_points": cfg.grid.n_points},
        "tau": dataclasses.asdict(cfg.tau),
        "post": dataclasses.asdict(cfg.post),
        "sensor": {"tolerance": cfg.sensor.tolerance},
        "g2tau": {"mode": cfg.g2tau.mode, "phase": cfg.g2tau.phase},
        "output": {"directory": cfg.output.directory, "formats": list(cfg.output.formats), "emit_plots": cfg.output.emit_plots},
    }
    if not cfg.filters:
        del out["filters"]
    if cfg.grid.range_ghz is not None:
        out["grid"]["range_ghz"] = cfg.grid.range_ghz
    if cfg.sensor.epsilon_sequence is not None:
        out["sensor"]["epsilon_sequence"] = list(cfg.sensor.epsilon_sequence)
    if cfg.g2tau.detunings_ghz is not None:
        out["g2tau"]["detunings_ghz"] = list(cfg.g2tau.detunings_ghz)
    return out


def dumps_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def loads_config(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    return config_from_dict(raw)


def load_config(path: str | os.PathLike) -> RunConfig:
    """Read and validate a TOML run configuration.

    Raises
    ------
    ConfigError
        On syntax errors (the message carries line and column) or on any
        unknown key or invalid value (the message names the key path).
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads_config(text)


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Return ``cfg`` with non-``None`` overrides applied.

    Recognized keys: ``out``, ``workers``, ``irf``, ``diffusion``, ``grid``,
    ``range``, ``no_plots``, ``rabi``, ``detuning``, ``kappa``.
    """
    raw = config_to_dict(cfg)
    ov = {k: v for k, v in overrides.items() if v is not None}
    if "out" in ov:
        raw["output"]["directory"] = str(ov["out"])
    if "workers" in ov:
        raw["workers"] = ov["workers"]
    if "irf" in ov:
        raw["post"]["irf_fwhm_ps"] = ov["irf"]
    if "diffusion" in ov:
        raw["post"]["diffusion_width_ghz"] = ov["diffusion"]
    if "grid" in ov:
        raw["grid"]["n_points"] = ov["grid"]
    if "range" in ov:
        raw["grid"]["range_ghz"] = ov["range"]
    if ov.get("no_plots"):
        raw["output"]["emit_plots"] = False
    for key, name in (("rabi", "rabi_ghz"), ("detuning", "detuning_ghz"), ("kappa", "kappa_ghz")):
        if key in ov:
            raw["emitter"][name] = ov[key]
    return config_from_dict(raw)


_ENV_KEYS = {
    "OUT": ("out", str),
    "WORKERS": ("workers", int),
    "IRF_PS": ("irf", float),
    "DIFFUSION_GHZ": ("diffusion", float),
    "GRID": ("grid", int),
    "RANGE_GHZ": ("range", float),
    "NO_PLOTS": ("no_plots", lambda s: s.strip().lower() in ("1", "true", "yes")),
}


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    """Overrides from ``TPSPEC_OUT``, ``TPSPEC_WORKERS``, ``TPSPEC_IRF_PS``,
    ``TPSPEC_DIFFUSION_GHZ``, ``TPSPEC_GRID``, ``TPSPEC_RANGE_GHZ`` and ``TPSPEC_NO_PLOTS``."""
    environ = os.environ if environ is None else environ
    out = {}
    for suffix, (key, conv) in _ENV_KEYS.items():
        name = ENV_PREFIX + suffix
        if name in environ:
            try:
                out[key] = conv(environ[name])
            except ValueError:
                raise ConfigError(f"environment variable {name}: cannot parse {environ[name]!r}") from None
    return out
