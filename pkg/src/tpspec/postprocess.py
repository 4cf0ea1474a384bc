"""Experiment-matching transforms: detector timing response and spectral diffusion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .correlations import (
    CorrelationMoments,
    FilterSpec,
    SensorConfig,
    Spectrum,
    correlation_moments,
    epsilon_limit,
    spectrum_rates,
)
from .emitter import EmitterParams, angular
from .errors import ResolutionError
from .traces import CorrelationTrace

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class IrfSpec:
    """Gaussian detector-pair timing response with the given FWHM (ps)."""

    fwhm_ps: float
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.fwhm_ps > 0:
            raise ValueError(f"IRF FWHM must be > 0, got {self.fwhm_ps}")
        if self.shape != "gaussian":
            raise ValueError(f"only gaussian IRFs are supported, got {self.shape!r}")

    @property
    def fwhm_ns(self) -> float:
        return self.fwhm_ps * 1e-3


@dataclass(frozen=True)
class DiffusionSpec:
    """Gaussian distribution of emitter-frequency offsets, FWHM in GHz."""

    width_ghz: float
    n_samples: int = 21
    shape: str = "gaussian"

    def __post_init__(self):
        if self.width_ghz < 0:
            raise ValueError(f"diffusion width must be >= 0, got {self.width_ghz}")
        if self.n_samples < 5 or self.n_samples % 2 == 0:
            raise ValueError(f"n_samples must be odd and >= 5, got {self.n_samples}")
        if self.shape != "gaussian":
            raise ValueError(f"only gaussian diffusion is supported, got {self.shape!r}")

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Hermite offsets (GHz, ascending) and weights summing to 1."""
        if self.width_ghz == 0:
            return np.zeros(1), np.ones(1)
        x, w = np.polynomial.hermite.hermgauss(self.n_samples)
        sigma = self.width_ghz / FWHM_PER_SIGMA
        return math.sqrt(2.0) * sigma * x, w / w.sum()

    def check_resolution(self, finest_ghz: float):
        if self.width_ghz / self.n_samples >= finest_ghz:
            raise ResolutionError(
                f"{self.n_samples} samples cannot resolve a {self.width_ghz} GHz diffusion "
                f"against features of width {finest_ghz} GHz"
            )


def convolve_irf(trace: CorrelationTrace, irf: IrfSpec) -> CorrelationTrace:
    """Convolve ``trace`` along tau with a unit-area Gaussian.

    The trace is extended with its edge values beyond the grid, which is
    the right continuation once the correlations have decayed to 1.
    """
    tau = trace.tau_grid_ns
    if tau.size < 3 or not trace.is_uniform:
        raise ResolutionError("IRF convolution needs a uniform tau grid of at least 3 points")
    span = tau[-1] - tau[0]
    if span <= 5.0 * irf.fwhm_ns:
        raise ResolutionError(f"tau grid spans {span:.3g} ns, needs more than 5 IRF widths ({5 * irf.fwhm_ns:.3g} ns)")
    dt = tau[1] - tau[0]
    sigma_steps = irf.fwhm_ns / FWHM_PER_SIGMA / dt
    values = gaussian_filter1d(trace.values, sigma_steps, mode="nearest", truncate=6.0)
    return trace.with_values(values, irf_fwhm_ps=irf.fwhm_ps, irf_shape=irf.shape)


def _weighted_sum(results: Sequence[Any], weights: np.ndarray):
    first = results[0]
    if isinstance(first, tuple):
        fields = [_weighted_sum([r[i] for r in results], weights) for i in range(len(first))]
        return type(first)(*fields) if hasattr(first, "_fields") else tuple(fields)
    total = weights[0] * np.asarray(results[0], dtype=float)
    for w, r in zip(weights[1:], results[1:]):
        total = total + w * np.asarray(r, dtype=float)
    return total if np.ndim(total) else float(total)


def diffusion_average(
    job: Callable[[float], Any],
    spec: DiffusionSpec,
    nominal_detuning_ghz: float = 0.0,
    workers: int = 1,
):
    """Average ``job(detuning_ghz)`` over slow emitter-frequency jitter.

    An emitter offset ``x`` shifts the laser detuning to ``nominal - x``.
    ``job`` may return a number, an array or a (named) tuple of those; the
    weighted sum is taken componentwise in a fixed order, so results do not
    depend on ``workers``.  For correlations return :class:`CorrelationMoments`
    and form the ratio after averaging.
    """
    offsets, weights = spec.nodes()
    detunings = [nominal_detuning_ghz - x for x in offsets]
    if workers > 1 and len(detunings) > 1:
        from .maps import run_parallel

        results = run_parallel(job, detunings, workers)
    else:
        results = [job(d) for d in detunings]
    return _weighted_sum(results, weights)


class _MomentsJob:
    """Picklable ``detuning -> CorrelationMoments`` closure."""

    def __init__(self, params, f1, f2, taus, epsilon):
        self.params, self.f1, self.f2, self.taus, self.epsilon = params, f1, f2, taus, epsilon

    def __call__(self, detuning_ghz):
        return correlation_moments(self.params.with_detuning(detuning_ghz), self.f1, self.f2, self.taus, self.epsilon)


def diffused_g2(
    params: EmitterParams,
    f1: FilterSpec,
    f2: FilterSpec,
    taus: Sequence[float],
    spec: DiffusionSpec,
    sensor_cfg: SensorConfig | None = None,
    workers: int = 1,
) -> CorrelationTrace:
    """Filtered g2 averaged over spectral diffusion around ``params.detuning_ghz``.

    Coincidences and accidental (singles-product) rates are averaged
    separately and divided afterwards, as a histogram accumulated over slow
    drift would be; the vanishing-coupling limit is taken on the ratio.
    """
    cfg = sensor_cfg or SensorConfig()
    taus = np.asarray(taus, dtype=float)
    spec.check_resolution(min(f1.bandwidth_ghz, f2.bandwidth_ghz))

    def evaluate(eps):
        m: CorrelationMoments = diffusion_average(_MomentsJob(params, f1, f2, taus, eps), spec, params.detuning_ghz, workers)
        return m.coincidence / m.accidental

    gamma_min = min(angular(f1.bandwidth_ghz), angular(f2.bandwidth_ghz))
    values, eps, residuals = epsilon_limit(evaluate, cfg.epsilons(gamma_min), cfg.tolerance)
    meta = {
        "params": params.to_dict(),
        "filters": [f1.to_dict(), f2.to_dict()],
        "irf_fwhm_ps": None,
        "diffusion_width_ghz": spec.width_ghz,
        "diffusion_samples": spec.n_samples,
        "sensor": cfg.to_dict(),
        "epsilon": eps,
        "residuals": residuals,
    }
    return CorrelationTrace(taus, values, meta)


class _SpectrumJob:
    def __init__(self, params, bandwidth_ghz, nu, epsilon):
        self.params, self.bandwidth_ghz, self.nu, self.epsilon = params, bandwidth_ghz, nu, epsilon

    def __call__(self, detuning_ghz):
        return spectrum_rates(self.params.with_detuning(detuning_ghz), self.bandwidth_ghz, self.nu, self.epsilon)


def diffused_spectrum(
    params: EmitterParams,
    bandwidth_ghz: float,
    nu_grid: Sequence[float],
    spec: DiffusionSpec,
    sensor_cfg: SensorConfig | None = None,
    workers: int = 1,
) -> Spectrum:
    """Filtered one-photon spectrum averaged over spectral diffusion, peak-normalized.

    Frequencies stay referenced to the laser, so the coherent centre line
    is not smeared while the sidebands are.
    """
    cfg = sensor_cfg or SensorConfig()
    nu = np.asarray(nu_grid, dtype=float)
    spec.check_resolution(bandwidth_ghz)
    rates, eps, residuals = epsilon_limit(
        lambda e: diffusion_average(_SpectrumJob(params, bandwidth_ghz, nu, e), spec, params.detuning_ghz, workers),
        cfg.epsilons(angular(bandwidth_ghz)),
        cfg.tolerance,
    )
    meta = {
        "params": params.to_dict(),
        "bandwidth_ghz": float(bandwidth_ghz),
        "sensor": cfg.to_dict(),
        "epsilon": eps,
        "residuals": residuals,
        "normalization": "peak",
        "diffusion_width_ghz": spec.width_ghz,
        "diffusion_samples": spec.n_samples,
    }
    return Spectrum(nu, rates / rates.max(), meta)
