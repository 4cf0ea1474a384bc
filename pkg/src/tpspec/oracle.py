"""Brute-force time-domain evaluation of filtered coincidences.

The filtered two-photon intensity at equal detection times T is the
quadruple integral, over emission times t1..t4 <= T, of the filter kernels

    exp(-G1/2 (T-t1)) exp(-G1/2 (T-t4)) exp(i D1 (t4 - t1))
    exp(-G2/2 (T-t2)) exp(-G2/2 (T-t3)) exp(i D2 (t3 - t2))

times the emitter correlator <T-[s^dag(t1) s^dag(t2)] T+[s(t3) s(t4)]>.
Dividing by the two filtered one-photon intensities gives g2(0) with all
prefactors cancelling.  Nothing here uses sensors; it only needs the bare
emitter generator, which makes it an independent check of the sensor method.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import quantum as qc
from .correlations import FilterSpec
from .emitter import SIGMA, SIGMA_DAG, EmitterParams, angular, liouvillian
from .errors import ResolutionError

# operator slots: s^dag(t1) [filter 1], s^dag(t2) [filter 2], s(t3) [filter 2], s(t4) [filter 1]
_DAGGERED = (True, True, False, False)
_FILTER_OF_SLOT = (0, 1, 1, 0)


@dataclass(frozen=True)
class OracleConfig:
    """Integration window [steady_start_ns, t_max_ns] and step, all in ns.

    The detection time is ``t_max_ns``; the window replaces the infinite
    past, which is harmless once it spans many filter and emitter memory times.
    """

    t_max_ns: float
    dt_ns: float
    steady_start_ns: float = 0.0

    @property
    def n_steps(self) -> int:
        return int(round((self.t_max_ns - self.steady_start_ns) / self.dt_ns))

    def validate(self, params: EmitterParams, f1: FilterSpec, f2: FilterSpec) -> "OracleConfig":
        if self.dt_ns <= 0 or self.t_max_ns <= self.steady_start_ns:
            raise ResolutionError("need dt_ns > 0 and t_max_ns > steady_start_ns")
        rates = [angular(params.generalized_rabi_ghz), params.kappa, angular(f1.bandwidth_ghz), angular(f2.bandwidth_ghz)]
        if self.dt_ns >= 1.0 / (10.0 * max(rates)):
            raise ResolutionError(f"dt_ns={self.dt_ns} does not resolve the fastest rate {max(rates):.3g} rad/ns")
        slowest = min(rates[1:])
        if self.t_max_ns <= self.steady_start_ns + 10.0 / slowest:
            raise ResolutionError(f"integration window is shorter than 10 memory times ({10.0 / slowest:.3g} ns)")
        return self

    @classmethod
    def for_point(cls, params: EmitterParams, f1: FilterSpec, f2: FilterSpec, steps_per_time: float = 20.0, memory: float = 20.0):
        """Window of ``memory / min(Gamma, kappa)`` and step ``1 / (steps_per_time * fastest rate)``."""
        rates = [angular(params.generalized_rabi_ghz), params.kappa, angular(f1.bandwidth_ghz), angular(f2.bandwidth_ghz)]
        dt = 1.0 / (steps_per_time * max(rates))
        window = memory / min(rates[1:])
        n = int(np.ceil(window / dt))
        return cls(t_max_ns=n * dt, dt_ns=dt, steady_start_ns=0.0)


def four_time_correlator(params: EmitterParams, t1: float, t2: float, t3: float, t4: float) -> complex:
    """<T-[s^dag(t1) s^dag(t2)] T+[s(t3) s(t4)]> in the stationary state.

    Events are applied chronologically from the steady state: lowering
    operators multiply from the left and raising operators from the right,
    which is exactly the time ordering the brackets prescribe.  Coincident
    events commute or vanish, so their order is immaterial.
    """
    times = (t1, t2, t3, t4)
    if min(times) < 0:
        raise ValueError("times must be nonnegative")
    gen = liouvillian(params)
    return _chain(gen, qc.steady_state(gen), times)


def _chain(gen, rho, times) -> complex:
    events = sorted(zip(times, _DAGGERED), key=lambda e: e[0])
    now = events[0][0]
    for t, daggered in events:
        if t > now:
            rho = qc.propagate(gen, rho, t - now)
            now = t
        rho = rho @ SIGMA_DAG if daggered else SIGMA @ rho
    return complex(np.trace(rho))


def _weights(params, f1, f2, cfg):
    t = cfg.steady_start_ns + cfg.dt_ns * np.arange(cfg.n_steps + 1)
    T = t[-1]
    quad = np.full(t.size, cfg.dt_ns)
    quad[0] = quad[-1] = 0.5 * cfg.dt_ns
    filters = (f1, f2)
    out = []
    for slot in range(4):
        f = filters[_FILTER_OF_SLOT[slot]]
        g, d = angular(f.bandwidth_ghz), angular(f.center_ghz)
        phase = -1.0 if _DAGGERED[slot] else 1.0
        out.append(quad * np.exp(-0.5 * g * (T - t) + 1j * phase * d * t))
    return out


def _discrete_sum(params, weights, slots, step_matrix) -> complex:
    rho = qc.steady_state(liouvillian(params))
    supers = {s: (qc.right(SIGMA_DAG) if _DAGGERED[s] else qc.left(SIGMA)).T for s in slots}
    x = np.zeros((16, 4), dtype=complex)
    x[0] = qc.vec(rho)
    plan = []
    for s in slots:
        bit = 1 << s
        src = np.array([m for m in range(16) if not m & bit])
        plan.append((src, src | bit, supers[s], weights[s]))
    prop_t = step_matrix.T
    for k in range(len(weights[0])):
        if k:
            x = x @ prop_t
        for src, dst, op_t, w in plan:
            x[dst] += w[k] * (x[src] @ op_t)
    full = sum(1 << s for s in slots)
    return complex(qc.trace_row(2) @ x[full])


@dataclass(frozen=True)
class DirectResult:
    """Discretized filtered intensities and their ratio.

    ``two_photon`` and ``one_photon`` omit the Gamma/(2 pi) kernel
    prefactors, which cancel in ``g2``.
    """

    g2: float
    two_photon: complex
    one_photon: tuple[complex, complex]
    config: OracleConfig


def direct_g2_zero_details(
    params: EmitterParams,
    f1: FilterSpec,
    f2: FilterSpec,
    cfg: OracleConfig | None = None,
    validate: bool = True,
) -> DirectResult:
    """Quadrature sums behind :func:`direct_g2_zero`.

    ``validate=False`` skips the resolution checks, which is only useful for
    comparing discretizations on deliberately tiny grids.
    """
    cfg = cfg or OracleConfig.for_point(params, f1, f2)
    if validate:
        cfg.validate(params, f1, f2)
    weights = _weights(params, f1, f2, cfg)
    step = scipy.linalg.expm(liouvillian(params).matrix * cfg.dt_ns)
    s2 = _discrete_sum(params, weights, (0, 1, 2, 3), step)
    s1a = _discrete_sum(params, weights, (0, 3), step)
    s1b = _discrete_sum(params, weights, (1, 2), step)
    return DirectResult(float((s2 / (s1a * s1b)).real), s2, (s1a, s1b), cfg)


def direct_g2_zero(params: EmitterParams, f1: FilterSpec, f2: FilterSpec, cfg: OracleConfig | None = None) -> float:
    """Filtered coincidence g2(w1, w2, 0) by direct time-domain quadrature."""
    return direct_g2_zero_details(params, f1, f2, cfg).g2


def brute_force_g2_zero(params: EmitterParams, f1: FilterSpec, f2: FilterSpec, cfg: OracleConfig) -> float:
    """Literal nested-loop version of :func:`direct_g2_zero` for tiny grids.

    Evaluates the time-ordered four-time correlator at every grid
    quadruple, so the cost is O(N**4) correlator chains.  No resolution
    checks are applied.
    """
    weights = _weights(params, f1, f2, cfg)
    t = cfg.steady_start_ns + cfg.dt_ns * np.arange(cfg.n_steps + 1)
    n = t.size
    gen = liouvillian(params)
    rho = qc.steady_state(gen)
    s2 = 0.0j
    for i1, i2, i3, i4 in itertools.product(range(n), repeat=4):
        w = weights[0][i1] * weights[1][i2] * weights[2][i3] * weights[3][i4]
        s2 += w * _chain(gen, rho, (t[i1], t[i2], t[i3], t[i4]))

    def first_order(slot_dag, slot):
        total = 0.0j
        for ia, ib in itertools.product(range(n), repeat=2):
            ta, tb = t[ia], t[ib]
            # <s^dag(ta) s(tb)>
            if tb <= ta:
                val = np.trace(SIGMA_DAG @ qc.propagate(gen, SIGMA @ rho, ta - tb))
            else:
                val = np.trace(SIGMA @ qc.propagate(gen, rho @ SIGMA_DAG, tb - ta))
            total += weights[slot_dag][ia] * weights[slot][ib] * val
        return total

    s1a = first_order(0, 3)
    s1b = first_order(1, 2)
    return float((s2 / (s1a * s1b)).real)
