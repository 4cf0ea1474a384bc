"""Frequency-filtered spectra and two-colour photon correlations.

Filtering is modelled with the sensor method: each filter is a two-level
"sensor" of frequency equal to the filter centre and decay rate equal to the
filter bandwidth (a Lorentzian of that FWHM), coupled to the emitter with a
strength ``epsilon``.  Correlations of the sensor populations, normalized and
taken in the limit ``epsilon -> 0``, are the filtered photon correlations.

Sensor populations scale as ``epsilon**2`` and coincidences as
``epsilon**4``.  To keep these small numbers accurate, every composite
generator is rescaled by the diagonal similarity ``rho = D rho_r D`` with
``D = diag(epsilon**n)``, ``n`` being the number of excited sensors in each
basis state.  In the rescaled ("reduced") coordinates all quantities are of
order one and the powers of ``epsilon`` cancel analytically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import quantum as qc
from .emitter import SIGMA, EmitterParams, angular
from .errors import ConvergenceError, SensorBackActionWarning, UndersampledWarning
from .traces import CorrelationTrace

DEFAULT_TOLERANCE = 1e-3
EPSILON_FRACTION = 1e-3
EPSILON_STEPS = (1.0, 0.5, 0.25)


@dataclass(frozen=True)
class FilterSpec:
    """Lorentzian filter: centre (relative to the laser) and FWHM, both in GHz."""

    center_ghz: float
    bandwidth_ghz: float

    def __post_init__(self):
        object.__setattr__(self, "center_ghz", float(self.center_ghz))
        object.__setattr__(self, "bandwidth_ghz", float(self.bandwidth_ghz))
        if not np.isfinite(self.center_ghz):
            raise ValueError(f"filter centre must be finite, got {self.center_ghz}")
        if not (np.isfinite(self.bandwidth_ghz) and self.bandwidth_ghz > 0):
            raise ValueError(f"filter bandwidth must be > 0, got {self.bandwidth_ghz}")

    @property
    def key(self):
        return (self.center_ghz, self.bandwidth_ghz)

    def to_dict(self):
        return {"center_ghz": self.center_ghz, "bandwidth_ghz": self.bandwidth_ghz}


@dataclass(frozen=True)
class SensorConfig:
    """Coupling strengths (rad/ns) for the vanishing-coupling limit.

    ``epsilon_sequence=None`` means ``min(Gamma) * 1e-3 * (1, 1/2, 1/4)``,
    derived per evaluation from the narrowest filter.
    """

    epsilon_sequence: tuple[float, ...] | None = None
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.epsilon_sequence is not None:
            seq = tuple(float(e) for e in self.epsilon_sequence)
            if len(seq) < 2:
                raise ValueError("epsilon_sequence needs at least two values to test convergence")
            if any(e <= 0 for e in seq) or any(b >= a for a, b in zip(seq, seq[1:])):
                raise ValueError("epsilon_sequence must be strictly decreasing and positive")
            object.__setattr__(self, "epsilon_sequence", seq)
        if not 0 < self.tolerance <= 0.1:
            raise ValueError(f"tolerance must lie in (0, 0.1], got {self.tolerance}")

    def epsilons(self, gamma_min: float) -> tuple[float, ...]:
        if self.epsilon_sequence is not None:
            return self.epsilon_sequence
        return tuple(gamma_min * EPSILON_FRACTION * f for f in EPSILON_STEPS)

    def to_dict(self):
        seq = None if self.epsilon_sequence is None else list(self.epsilon_sequence)
        return {"epsilon_sequence": seq, "tolerance": self.tolerance}


# ---------------------------------------------------------------------------
# composite emitter + sensors


@lru_cache(maxsize=None)
def _composite_pieces(n_sensors: int):
    """Fixed superoperator building blocks for emitter x n_sensors sensors.

    The generator is a linear combination of these pieces with the model
    parameters as coefficients, which is much cheaper than rebuilding it.
    """
    eye2 = np.eye(2, dtype=complex)
    dim = 2 ** (n_sensors + 1)

    def embed(op, slot):
        out = np.ones((1, 1), dtype=complex)
        for k in range(n_sensors + 1):
            out = np.kron(out, op if k == slot else eye2)
        return out

    sigma = embed(SIGMA, 0)
    sensors = [embed(SIGMA, k + 1) for k in range(n_sensors)]

    def commutator(h):
        return -1j * (qc.left(h) - qc.right(h))

    def dissipator(op):
        n = qc.dag(op) @ op
        return qc.sandwich(op, qc.dag(op)) - 0.5 * qc.left(n) - 0.5 * qc.right(n)

    sd = qc.dag(sigma)
    pieces = {
        "emitter_detuning": commutator(-(sd @ sigma)),
        "emitter_drive": commutator(0.5 * (sigma + sd)),
        "emitter_decay": dissipator(sigma),
        "sensor_freq": [commutator(qc.dag(a) @ a) for a in sensors],
        "sensor_decay": [dissipator(a) for a in sensors],
        "coupling": [commutator(sd @ a + qc.dag(a) @ sigma) for a in sensors],
    }
    # sensor excitation count of each basis state; emitter is the most significant factor
    n_exc = np.array([bin(i & (2**n_sensors - 1)).count("1") for i in range(dim)])
    ops = {"sigma": sigma, "sensors": sensors, "n_exc": n_exc, "dim": dim}
    return pieces, ops


def composite_operators(n_sensors: int = 2) -> dict:
    """Emitter lowering operator and sensor lowering operators on the composite space.

    Ordering of tensor factors: emitter, sensor 1, sensor 2.
    """
    _, ops = _composite_pieces(n_sensors)
    return {"sigma": ops["sigma"], "sensors": list(ops["sensors"]), "dim": ops["dim"]}


def _check_epsilon(epsilon: float, filters: Sequence[FilterSpec]):
    if epsilon < 0:
        raise ValueError(f"sensor coupling must be >= 0, got {epsilon}")
    gamma_min = min(angular(f.bandwidth_ghz) for f in filters)
    if epsilon >= gamma_min / 10:
        warnings.warn(
            f"sensor back-action regime: epsilon={epsilon:.3g} rad/ns is not small against "
            f"the narrowest filter bandwidth {gamma_min:.3g} rad/ns",
            SensorBackActionWarning,
            stacklevel=3,
        )


def build_composite(
    params: EmitterParams,
    f1: FilterSpec,
    f2: FilterSpec | None = None,
    epsilon: float = 0.0,
) -> qc.Superoperator:
    """Lindblad generator of emitter x sensor1 [x sensor2], in rad/ns.

    Sensors sit at ``+Delta_i s_i^dag s_i`` with ``Delta_i = omega_i - omega_L``
    so that each one resonates with emitted light at its filter centre; the
    coupling is ``epsilon (sigma^dag s_i + s_i^dag sigma)``.
    """
    filters = [f for f in (f1, f2) if f is not None]
    _check_epsilon(epsilon, filters)
    ops = composite_operators(len(filters))
    sigma = ops["sigma"]
    h = -params.detuning * qc.dag(sigma) @ sigma + 0.5 * params.rabi * (sigma + qc.dag(sigma))
    jumps = [(sigma, params.kappa)]
    for f, a in zip(filters, ops["sensors"]):
        h = h + angular(f.center_ghz) * qc.dag(a) @ a + epsilon * (qc.dag(sigma) @ a + qc.dag(a) @ sigma)
        jumps.append((a, angular(f.bandwidth_ghz)))
    return qc.build_lindblad(h, jumps)


class SensorSystem:
    """Rescaled composite generator at one coupling strength.

    All returned rates and coincidences are in reduced units (divided by
    ``epsilon**2`` and ``epsilon**4`` respectively), so their ratios are the
    physical normalized correlations.
    """

    def __init__(self, params: EmitterParams, filters: Sequence[FilterSpec], epsilon: float):
        if epsilon <= 0:
            raise ValueError("the rescaled sensor system needs epsilon > 0")
        _check_epsilon(epsilon, filters)
        pieces, ops = _composite_pieces(len(filters))
        mat = (
            params.detuning * pieces["emitter_detuning"]
            + params.rabi * pieces["emitter_drive"]
            + params.kappa * pieces["emitter_decay"]
        )
        for k, f in enumerate(filters):
            mat = mat + angular(f.center_ghz) * pieces["sensor_freq"][k]
            mat = mat + angular(f.bandwidth_ghz) * pieces["sensor_decay"][k]
            mat = mat + epsilon * pieces["coupling"][k]
        d = float(epsilon) ** ops["n_exc"]
        scale = np.kron(d, d)
        self.epsilon = float(epsilon)
        self.dim = ops["dim"]
        self.sensors = ops["sensors"]
        self.sigma = ops["sigma"]
        self.matrix = mat * (scale[None, :] / scale[:, None])
        self._scale = scale
        self._propagator = None
        self.x_ss = qc.solve_steady(self.matrix, qc.trace_row(self.dim) * scale)

    def reduced_row(self, observable: np.ndarray) -> np.ndarray:
        """Row giving ``<observable> / epsilon**2`` for a single-sensor-excitation observable."""
        return qc.expectation_row(observable) * self._scale / self.epsilon**2

    def rate(self, k: int) -> float:
        a = self.sensors[k]
        return float((self.reduced_row(qc.dag(a) @ a) @ self.x_ss).real)

    def rate_of(self, mode: np.ndarray) -> float:
        return float((self.reduced_row(qc.dag(mode) @ mode) @ self.x_ss).real)

    @property
    def propagator(self) -> qc.Propagator:
        if self._propagator is None:
            self._propagator = qc.Propagator(self.matrix)
        return self._propagator

    def coincidence(self, first: np.ndarray, second: np.ndarray, taus: np.ndarray) -> np.ndarray:
        """Reduced ``<first^dag(0) second^dag(tau) second(tau) first(0)>`` for ``tau >= 0``."""
        start = qc.sandwich(first, qc.dag(first)) @ self.x_ss
        row = self.reduced_row(qc.dag(second) @ second)
        taus = np.asarray(taus, dtype=float)
        out = np.empty(taus.size)
        zero = taus == 0
        out[zero] = (row @ start).real
        if not np.all(zero):
            out[~zero] = self.propagator.project(row, start, taus[~zero]).real
        return out


class CorrelationMoments(NamedTuple):
    """Unnormalized (reduced-unit) ingredients of a filtered g2.

    ``accidental`` is the product of the two singles rates; g2 is
    ``coincidence / accidental``.  Keeping them separate lets slow
    detuning averages weight every configuration by its count rate.
    """

    coincidence: np.ndarray
    rate1: float
    rate2: float
    accidental: float


def correlation_moments(
    params: EmitterParams,
    f1: FilterSpec,
    f2: FilterSpec,
    taus: Sequence[float],
    epsilon: float,
) -> CorrelationMoments:
    """Coincidence trace and singles rates at fixed coupling.

    Negative delays use the exchanged detector roles on the same composite
    system, ``g2(w1, w2, -tau) = g2(w2, w1, tau)``.
    """
    taus = np.asarray(taus, dtype=float)
    sysm = SensorSystem(params, (f1, f2), epsilon)
    s1, s2 = sysm.sensors
    coinc = np.empty(taus.size)
    pos = taus >= 0
    if np.any(pos):
        coinc[pos] = sysm.coincidence(s1, s2, taus[pos])
    if not np.all(pos):
        neg = ~pos
        coinc[neg] = sysm.coincidence(s2, s1, -taus[neg])
    r1, r2 = sysm.rate(0), sysm.rate(1)
    return CorrelationMoments(coinc, r1, r2, r1 * r2)


def relative_change(new, old) -> float:
    new = np.asarray(new, dtype=float)
    old = np.asarray(old, dtype=float)
    denom = max(float(np.max(np.abs(old), initial=0.0)), 1e-300)
    return float(np.max(np.abs(new - old), initial=0.0) / denom)


def epsilon_limit(evaluate: Callable[[float], np.ndarray], epsilons: Sequence[float], tolerance: float):
    """Evaluate at decreasing couplings until consecutive results agree.

    Returns
    -------
    value, epsilon, residuals
        The result at the accepted (smallest evaluated) coupling, that
        coupling, and the relative changes observed along the way.

    Raises
    ------
    ConvergenceError
        If the sequence is exhausted without meeting ``tolerance``.
    """
    residuals = []
    prev = evaluate(epsilons[0])
    for eps in epsilons[1:]:
        cur = evaluate(eps)
        res = relative_change(cur, prev)
        residuals.append(res)
        if np.isfinite(res) and res < tolerance:
            return cur, eps, residuals
        prev = cur
    raise ConvergenceError(
        f"epsilon limit did not converge to {tolerance:g}: residuals {residuals}", residuals
    )


def _canonical(f1: FilterSpec, f2: FilterSpec) -> bool:
    return f1.key <= f2.key


def _check_tau_sampling(params: EmitterParams, filters: Sequence[FilterSpec], taus: np.ndarray):
    if taus.size < 2:
        return
    # ten samples per period of the fastest ordinary frequency
    fastest = max([params.generalized_rabi_ghz, params.kappa_ghz] + [f.bandwidth_ghz for f in filters])
    step = float(np.max(np.diff(np.sort(taus))))
    if step > 1.0 / (10.0 * fastest):
        warnings.warn(
            f"tau grid step {step:.3g} ns undersamples dynamics at {fastest:.3g} GHz",
            UndersampledWarning,
            stacklevel=3,
        )


def _g2_metadata(params, f1, f2, cfg, eps, residuals, **extra):
    meta = {
        "params": params.to_dict(),
        "filters": [f1.to_dict(), f2.to_dict()],
        "irf_fwhm_ps": None,
        "diffusion_width_ghz": None,
        "sensor": cfg.to_dict(),
        "epsilon": eps,
        "residuals": residuals,
    }
    meta.update(extra)
    return meta


def filtered_g2(
    params: EmitterParams,
    f1: FilterSpec,
    f2: FilterSpec,
    taus: Sequence[float],
    sensor_cfg: SensorConfig | None = None,
) -> CorrelationTrace:
    """Two-colour correlation g2(w1, w2, tau), tau = T2 - T1.

    Filter 1 detects the photon at ``T1`` and filter 2 the one at ``T2``.
    The pair is evaluated in a fixed canonical order so that exchanging the
    filters mirrors the trace in tau exactly.
    """
    cfg = sensor_cfg or SensorConfig()
    taus = np.asarray(taus, dtype=float)
    if not _canonical(f1, f2):
        swapped = filtered_g2(params, f2, f1, -taus[::-1], cfg).reversed()
        return swapped.with_values(swapped.values, filters=[f1.to_dict(), f2.to_dict()])
    if not np.all(np.isfinite(taus)):
        raise ValueError("tau grid must be finite")
    _check_tau_sampling(params, (f1, f2), taus)

    def evaluate(eps):
        m = correlation_moments(params, f1, f2, taus, eps)
        return m.coincidence / m.accidental

    gamma_min = min(angular(f1.bandwidth_ghz), angular(f2.bandwidth_ghz))
    values, eps, residuals = epsilon_limit(evaluate, cfg.epsilons(gamma_min), cfg.tolerance)
    return CorrelationTrace(taus, values, _g2_metadata(params, f1, f2, cfg, eps, residuals))


def filtered_g2_zero(
    params: EmitterParams,
    f1: FilterSpec,
    f2: FilterSpec,
    sensor_cfg: SensorConfig | None = None,
) -> float:
    """Coincidence value g2(w1, w2, 0)."""
    return float(filtered_g2(params, f1, f2, [0.0], sensor_cfg).values[0])


def recombined_sideband_g2(
    params: EmitterParams,
    f_red: FilterSpec,
    f_blue: FilterSpec,
    taus: Sequence[float],
    sensor_cfg: SensorConfig | None = None,
    phase: float = 0.0,
) -> CorrelationTrace:
    """Autocorrelation of two filtered outputs recombined on a beam splitter.

    The combined mode is ``b = (s_1 + exp(i phase) s_2) / sqrt(2)``.  Being an
    autocorrelation of one stationary mode, the trace is even in tau; negative
    delays are filled in from ``|tau|``.
    """
    cfg = sensor_cfg or SensorConfig()
    taus = np.asarray(taus, dtype=float)
    _check_tau_sampling(params, (f_red, f_blue), taus)
    abs_t = np.abs(taus)
    order = np.argsort(abs_t, kind="stable")

    def evaluate(eps):
        sysm = SensorSystem(params, (f_red, f_blue), eps)
        s1, s2 = sysm.sensors
        b = (s1 + np.exp(1j * phase) * s2) / math.sqrt(2.0)
        out = np.empty(taus.size)
        out[order] = sysm.coincidence(b, b, abs_t[order])
        return out / sysm.rate_of(b) ** 2

    gamma_min = min(angular(f_red.bandwidth_ghz), angular(f_blue.bandwidth_ghz))
    values, eps, residuals = epsilon_limit(evaluate, cfg.epsilons(gamma_min), cfg.tolerance)
    meta = _g2_metadata(params, f_red, f_blue, cfg, eps, residuals, mode="recombined", phase=phase)
    return CorrelationTrace(taus, values, meta)


# ---------------------------------------------------------------------------
# one-photon spectrum


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Filtered one-photon spectrum, peak-normalized to 1."""

    nu_ghz: np.ndarray
    intensity: np.ndarray
    metadata: dict

    def __iter__(self):
        return iter(zip(self.nu_ghz.tolist(), self.intensity.tolist()))

    def __len__(self):
        return self.nu_ghz.size


def spectrum_rates(params: EmitterParams, bandwidth_ghz: float, nu_grid: Sequence[float], epsilon: float) -> np.ndarray:
    """Unnormalized sensor populations (reduced units) across filter centres."""
    return np.array(
        [SensorSystem(params, (FilterSpec(nu, bandwidth_ghz),), epsilon).rate(0) for nu in np.asarray(nu_grid, float)]
    )


def filtered_spectrum(
    params: EmitterParams,
    bandwidth_ghz: float,
    nu_grid: Sequence[float],
    sensor_cfg: SensorConfig | None = None,
) -> Spectrum:
    """One-photon spectrum seen through a Lorentzian filter of FWHM ``bandwidth_ghz``."""
    cfg = sensor_cfg or SensorConfig()
    nu = np.asarray(nu_grid, dtype=float)
    if nu.size == 0 or not np.all(np.isfinite(nu)):
        raise ValueError("frequency grid must be nonempty and finite")
    FilterSpec(0.0, bandwidth_ghz)
    rates, eps, residuals = epsilon_limit(
        lambda e: spectrum_rates(params, bandwidth_ghz, nu, e),
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
        "diffusion_width_ghz": None,
    }
    return Spectrum(nu, rates / rates.max(), meta)
