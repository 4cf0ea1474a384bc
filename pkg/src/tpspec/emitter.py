"""The coherently driven two-level emitter.

Frequencies enter as ordinary frequencies in GHz (nu = omega / 2 pi) and
relative to the laser; they are converted to rad/ns before anything is built.
The rotating-frame Hamiltonian is ``H = -delta s^dag s + (Omega/2)(s + s^dag)``
with ``delta = omega_L - omega_0``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from . import quantum as qc
from .traces import CorrelationTrace

TWO_PI = 2.0 * math.pi


def angular(nu_ghz):
    """GHz -> rad/ns."""
    return TWO_PI * np.asarray(nu_ghz, dtype=float) if np.ndim(nu_ghz) else TWO_PI * float(nu_ghz)


SIGMA = qc.lowering(2)
SIGMA_DAG = qc.dag(SIGMA)
EXCITED = SIGMA_DAG @ SIGMA


@dataclass(frozen=True)
class EmitterParams:
    """Drive strength, laser detuning and radiative decay, all as nu = omega/2pi in GHz."""

    rabi_ghz: float
    detuning_ghz: float = 0.0
    kappa_ghz: float = 0.2

    def __post_init__(self):
        for name in ("rabi_ghz", "detuning_ghz", "kappa_ghz"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, float(v))
        if self.rabi_ghz < 0:
            raise ValueError(f"rabi_ghz must be >= 0, got {self.rabi_ghz}")
        if self.kappa_ghz <= 0:
            raise ValueError(f"kappa_ghz must be > 0, got {self.kappa_ghz}")

    @property
    def rabi(self) -> float:
        return angular(self.rabi_ghz)

    @property
    def detuning(self) -> float:
        return angular(self.detuning_ghz)

    @property
    def kappa(self) -> float:
        return angular(self.kappa_ghz)

    @property
    def generalized_rabi_ghz(self) -> float:
        return math.hypot(self.rabi_ghz, self.detuning_ghz)

    def with_detuning(self, detuning_ghz: float) -> "EmitterParams":
        return replace(self, detuning_ghz=detuning_ghz)

    def to_dict(self) -> dict:
        return asdict(self)


def hamiltonian(params: EmitterParams) -> np.ndarray:
    return -params.detuning * EXCITED + 0.5 * params.rabi * (SIGMA + SIGMA_DAG)


def liouvillian(params: EmitterParams) -> qc.Superoperator:
    return qc.build_lindblad(hamiltonian(params), [(SIGMA, params.kappa)])


def excited_population(params: EmitterParams) -> float:
    """Closed-form optical-Bloch steady-state excited population."""
    om, de, ka = params.rabi, params.detuning, params.kappa
    return (om**2 / 4) / (de**2 + ka**2 / 4 + om**2 / 2)


@dataclass(frozen=True)
class DressedStates:
    """Amplitudes of |1> = c|g> - s|e> and |2> = s|g> + c|e>."""

    c: float
    s: float
    omega_prime_ghz: float


def dressed_states(params: EmitterParams) -> DressedStates:
    op = params.generalized_rabi_ghz
    if op == 0.0:
        raise ValueError("dressed states are undefined without drive and detuning (generalized Rabi frequency is 0)")
    d = params.detuning_ghz
    # (op - |d|) loses precision when the detuning dominates; use op - |d| = rabi^2 / (op + |d|),
    # written in ratios to op so that tiny frequencies do not underflow
    ratio = abs(d) / op
    small = (params.rabi_ghz / op) / math.sqrt(2 * (1 + ratio))
    large = math.sqrt((1 + ratio) / 2)
    c, s = (large, small) if d >= 0 else (small, large)
    return DressedStates(c=c, s=s, omega_prime_ghz=op)


def mollow_peaks(params: EmitterParams) -> tuple[float, float, float]:
    """Red sideband, central line and blue sideband, in GHz relative to the laser."""
    op = dressed_states(params).omega_prime_ghz
    return (-op, 0.0, op)


@dataclass(frozen=True)
class TpsFeature:
    label: str
    nu1_ghz: float
    nu2_ghz: float
    expected_sign: str  # antibunching | uncorrelated | partial-antibunching | bunching


EXPECTED_SIGNS = ("antibunching", "uncorrelated", "partial-antibunching", "bunching")

# Leapfrog points in units of the Rabi frequency.  Six lie on the side
# antidiagonals nu1 + nu2 = +-Omega; two at the half-Rabi points of the central one.
_LEAPFROG = (
    ("D_i", 0.5, 0.5),
    ("D_ii", -0.5, -0.5),
    ("D_iii", 1.5, -0.5),
    ("D_iv", -0.5, 1.5),
    ("D_v", -1.5, 0.5),
    ("D_vi", 0.5, -1.5),
    ("D_vii", 0.5, -0.5),
    ("D_viii", -0.5, 0.5),
)


def feature_catalog(params: EmitterParams) -> list[TpsFeature]:
    """Nominal positions of the resonant two-photon spectrum features.

    A: sideband pairs (antibunching for like sidebands, bunching for opposite
    ones); B: central line on both detectors; C: central line with one
    sideband; D: leapfrog (virtual-intermediate-state) bunching points.
    Positions are nominal; actual extrema sit within a filter bandwidth.
    """
    if params.detuning_ghz != 0.0:
        raise ValueError("the feature catalog is only defined on resonance (detuning_ghz == 0)")
    om = params.rabi_ghz
    feats = [
        TpsFeature("A_i", om, om, "antibunching"),
        TpsFeature("A_ii", -om, -om, "antibunching"),
        TpsFeature("A_iii", om, -om, "bunching"),
        TpsFeature("A_iv", -om, om, "bunching"),
        TpsFeature("B", 0.0, 0.0, "uncorrelated"),
        TpsFeature("C_i", 0.0, om, "partial-antibunching"),
        TpsFeature("C_ii", 0.0, -om, "partial-antibunching"),
        TpsFeature("C_iii", om, 0.0, "partial-antibunching"),
        TpsFeature("C_iv", -om, 0.0, "partial-antibunching"),
    ]
    feats += [TpsFeature(label, a * om, b * om, "bunching") for label, a, b in _LEAPFROG]
    return feats


UNCORRELATED_BAND = 0.15


def sign_agrees(expected_sign: str, g2_value: float, band: float = UNCORRELATED_BAND) -> bool:
    """Whether a coincidence value shows the statistics a catalog entry expects.

    Bunching means ``g2 > 1``; antibunching and partial antibunching mean
    ``g2 < 1``; uncorrelated means ``|g2 - 1| <= band``.
    """
    if expected_sign == "bunching":
        return g2_value > 1
    if expected_sign in ("antibunching", "partial-antibunching"):
        return g2_value < 1
    if expected_sign == "uncorrelated":
        return abs(g2_value - 1) <= band
    raise ValueError(f"unknown expected sign {expected_sign!r}")


def _trace_metadata(params: EmitterParams, method: str) -> dict:
    return {"params": params.to_dict(), "filters": None, "method": method}


def unfiltered_g2_closed_form(params: EmitterParams, taus: Sequence[float]) -> np.ndarray:
    """Resonant, underdamped intensity correlation of the bare emitter."""
    if params.detuning_ghz != 0.0:
        raise ValueError("closed form requires detuning_ghz == 0")
    om, ka = params.rabi, params.kappa
    if om <= ka / 4:
        raise ValueError("closed form requires Omega > kappa/4 (underdamped)")
    om_r = math.sqrt(om**2 - (ka / 4) ** 2)
    t = np.abs(np.asarray(taus, dtype=float))
    return 1.0 - np.exp(-0.75 * ka * t) * (np.cos(om_r * t) + 0.75 * ka / om_r * np.sin(om_r * t))


def unfiltered_g2_numerical(params: EmitterParams, taus: Sequence[float]) -> np.ndarray:
    """Same correlation via the quantum regression theorem, any detuning."""
    if params.rabi_ghz == 0.0:
        raise ValueError("an undriven emitter emits no light; g2 is undefined")
    taus = np.asarray(taus, dtype=float)
    gen = liouvillian(params)
    rho = qc.steady_state(gen)
    pop = np.trace(EXCITED @ rho).real
    t = np.abs(taus)
    order = np.argsort(t, kind="stable")
    vals = np.empty_like(t)
    vals[order] = qc.regression_correlator(gen, rho, SIGMA, SIGMA_DAG, EXCITED, t[order]).real
    return vals / pop**2


def unfiltered_g2(params: EmitterParams, taus: Sequence[float]) -> CorrelationTrace:
    """Unfiltered g2(tau) of the emitter.

    Uses the closed form on resonance in the underdamped regime and the
    regression theorem otherwise; the method used is recorded in metadata.
    """
    taus = np.asarray(taus, dtype=float)
    if params.detuning_ghz == 0.0 and params.rabi > params.kappa / 4:
        return CorrelationTrace(taus, unfiltered_g2_closed_form(params, taus), _trace_metadata(params, "closed_form"))
    return CorrelationTrace(taus, unfiltered_g2_numerical(params, taus), _trace_metadata(params, "regression"))
