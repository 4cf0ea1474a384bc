"""Two-dimensional sweeps: two-photon spectra and Cauchy-Schwarz ratio maps."""

from __future__ import annotations

import math
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .correlations import FilterSpec, SensorConfig, filtered_g2
from .emitter import EmitterParams
from .errors import ConvergenceError, MaskedPointsError, TpsError
from .postprocess import DiffusionSpec, IrfSpec, convolve_irf, diffused_g2

MAX_GRID = 301
MAX_MASKED_FRACTION = 0.01
CS_DENOMINATOR_FLOOR = 1e-9


class PointError(TpsError):
    """A single job of a parallel sweep failed."""

    def __init__(self, index, item, cause):
        super().__init__(f"job {index} at {item!r} failed: {type(cause).__name__}: {cause}")
        self.index = index
        self.item = item
        self.cause = cause


# ---------------------------------------------------------------------------
# parallel execution


def _init_worker():
    # one BLAS thread per process keeps results independent of the worker count
    threadpool_limits(1)


def _run_chunk(fn, chunk):
    out = []
    for index, item in chunk:
        start = time.perf_counter()
        try:
            result = fn(item)
        except Exception as exc:  # reported with coordinates by the caller
            return out, (index, item, exc)
        out.append((result, time.perf_counter() - start))
    return out, None


def run_parallel(
    fn: Callable[[Any], Any],
    items: Sequence[Any],
    workers: int = 1,
    progress: Callable[[int, int], None] | None = None,
    chunksize: int | None = None,
    return_timings: bool = False,
):
    """Apply ``fn`` to every item, in input order.

    Results are identical to a serial loop for any ``workers``: each job runs
    single-threaded and results are placed by index.  ``progress(done, total)``
    is called after each completed chunk.

    Raises
    ------
    PointError
        Wrapping the first failing job, with its index and item.
    """
    items = list(items)
    n = len(items)
    if n == 0:
        return ([], []) if return_timings else []
    workers = max(1, int(workers))
    if chunksize is None:
        chunksize = max(1, math.ceil(n / (workers * 8)))
    chunks = [list(enumerate(items))[i : i + chunksize] for i in range(0, n, chunksize)]
    results, timings, done = [], [], 0

    def collect(chunk_out):
        nonlocal done
        out, failure = chunk_out
        if failure is not None:
            raise PointError(*failure)
        for res, dt in out:
            results.append(res)
            timings.append(dt)
        done += len(out)
        if progress is not None:
            progress(done, n)

    if workers == 1:
        with threadpool_limits(1):
            for chunk in chunks:
                collect(_run_chunk(fn, chunk))
    else:
        ctx = multiprocessing.get_context("fork" if os.name == "posix" else "spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_init_worker) as pool:
            futures = [pool.submit(_run_chunk, fn, chunk) for chunk in chunks]
            for fut in futures:
                collect(fut.result())
    return (results, timings) if return_timings else results


# ---------------------------------------------------------------------------
# map types


@dataclass(frozen=True, eq=False)
class SpectralMap2D:
    """Values on a (nu1, nu2) grid; row index follows nu1.

    Masked (non-converged) points hold NaN.
    """

    nu1_grid_ghz: np.ndarray
    nu2_grid_ghz: np.ndarray
    values: np.ndarray
    kind: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("tps", "cs_ratio"):
            raise ValueError(f"unknown map kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.nu1_grid_ghz), len(self.nu2_grid_ghz)):
            raise ValueError(f"values of shape {v.shape} do not match the axes")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "nu1_grid_ghz", np.asarray(self.nu1_grid_ghz, dtype=float))
        object.__setattr__(self, "nu2_grid_ghz", np.asarray(self.nu2_grid_ghz, dtype=float))

    @property
    def mask(self) -> np.ndarray:
        return ~np.isfinite(self.values)

    @property
    def masked_fraction(self) -> float:
        return float(self.mask.mean()) if self.values.size else 0.0

    def index_of(self, nu1_ghz: float, nu2_ghz: float) -> tuple[int, int]:
        return int(np.argmin(np.abs(self.nu1_grid_ghz - nu1_ghz))), int(np.argmin(np.abs(self.nu2_grid_ghz - nu2_ghz)))

    def value_at(self, nu1_ghz: float, nu2_ghz: float) -> float:
        """Value at the grid point nearest to (nu1, nu2)."""
        return float(self.values[self.index_of(nu1_ghz, nu2_ghz)])


@dataclass(frozen=True)
class MapGrid:
    nu1_ghz: np.ndarray
    nu2_ghz: np.ndarray

    @classmethod
    def square(cls, n_points: int, half_range_ghz: float) -> "MapGrid":
        if n_points < 1 or half_range_ghz <= 0:
            raise ValueError("grid needs n_points >= 1 and a positive range")
        axis = np.linspace(-half_range_ghz, half_range_ghz, n_points)
        return cls(axis, axis)

    @classmethod
    def default(cls, params: EmitterParams, n_points: int = 101) -> "MapGrid":
        if params.rabi_ghz <= 0:
            raise ValueError("default grid spans +-2 Omega and needs a nonzero Rabi frequency")
        return cls.square(n_points, 2.0 * params.rabi_ghz)

    @property
    def is_square(self) -> bool:
        return len(self.nu1_ghz) == len(self.nu2_ghz) and np.array_equal(self.nu1_ghz, self.nu2_ghz)


@dataclass(frozen=True)
class MapOptions:
    irf: IrfSpec | None = None
    diffusion: DiffusionSpec | None = None
    sensor: SensorConfig = SensorConfig()
    workers: int = 1
    max_grid: int = MAX_GRID
    max_masked_fraction: float = MAX_MASKED_FRACTION
    progress: Callable[[int, int], None] | None = None

    def describe(self) -> dict:
        return {
            "irf_fwhm_ps": None if self.irf is None else self.irf.fwhm_ps,
            "irf_shape": None if self.irf is None else self.irf.shape,
            "diffusion_width_ghz": None if self.diffusion is None else self.diffusion.width_ghz,
            "diffusion_samples": None if self.diffusion is None else self.diffusion.n_samples,
            "sensor": self.sensor.to_dict(),
            "workers": self.workers,
            "max_masked_fraction": self.max_masked_fraction,
        }


def irf_tau_grid(params: EmitterParams, bandwidth_ghz: float, irf: IrfSpec) -> np.ndarray:
    """Symmetric delay grid over [-3 FWHM, 3 FWHM] containing tau = 0."""
    fastest = max(params.generalized_rabi_ghz, params.kappa_ghz, bandwidth_ghz)
    dt = min(irf.fwhm_ns / 20.0, 1.0 / (20.0 * fastest))
    n = int(math.ceil(3.0 * irf.fwhm_ns / dt))
    return dt * np.arange(-n, n + 1)


class CoincidencePoint:
    """Picklable evaluation of one coincidence value g2(nu1, nu2, 0).

    With an IRF, a short delay trace is convolved and sampled at zero.
    Returns ``(value, epsilon, max_residual)``; non-convergence gives a NaN
    value instead of raising.
    """

    def __init__(self, params: EmitterParams, bandwidth_ghz: float, options: MapOptions):
        self.params = params
        self.bandwidth_ghz = bandwidth_ghz
        self.irf = options.irf
        self.diffusion = options.diffusion
        self.sensor = options.sensor
        self.taus = np.zeros(1) if self.irf is None else irf_tau_grid(params, bandwidth_ghz, self.irf)
        self.center = self.taus.size // 2

    def __call__(self, point):
        nu1, nu2 = point
        f1 = FilterSpec(nu1, self.bandwidth_ghz)
        f2 = FilterSpec(nu2, self.bandwidth_ghz)
        try:
            if self.diffusion is not None and self.diffusion.width_ghz > 0:
                trace = diffused_g2(self.params, f1, f2, self.taus, self.diffusion, self.sensor)
            else:
                trace = filtered_g2(self.params, f1, f2, self.taus, self.sensor)
        except ConvergenceError as exc:
            return math.nan, math.nan, max(exc.residuals, default=math.nan)
        if self.irf is not None:
            trace = convolve_irf(trace, self.irf)
        return float(trace.values[self.center]), trace.metadata["epsilon"], max(trace.metadata["residuals"])


def _check_grid(grid: MapGrid, options: MapOptions):
    for name, axis in (("nu1", grid.nu1_ghz), ("nu2", grid.nu2_ghz)):
        if len(axis) > options.max_grid:
            raise ValueError(f"{name} axis has {len(axis)} points, above the limit of {options.max_grid}")
        if len(axis) > 1 and np.any(np.diff(axis) <= 0):
            raise ValueError(f"{name} axis must be strictly ascending")


def _evaluate_points(params, bandwidth_ghz, points, options):
    job = CoincidencePoint(params, bandwidth_ghz, options)
    results, timings = run_parallel(job, points, options.workers, options.progress, return_timings=True)
    return results, timings


def tps_map(
    params: EmitterParams,
    bandwidth_ghz: float,
    grid: MapGrid | None = None,
    options: MapOptions | None = None,
) -> SpectralMap2D:
    """Two-photon spectrum g2(nu1, nu2, 0) with equal filter bandwidths.

    On a square grid only the upper triangle is computed and mirrored,
    using g2(nu1, nu2, 0) = g2(nu2, nu1, 0).

    Raises
    ------
    MaskedPointsError
        If more than ``options.max_masked_fraction`` of the points failed
        to converge.
    """
    options = options or MapOptions()
    grid = grid or MapGrid.default(params)
    _check_grid(grid, options)
    start = time.perf_counter()
    n1, n2 = len(grid.nu1_ghz), len(grid.nu2_ghz)
    if grid.is_square:
        index = [(i, j) for i in range(n1) for j in range(i, n2)]
    else:
        index = [(i, j) for i in range(n1) for j in range(n2)]
    points = [(float(grid.nu1_ghz[i]), float(grid.nu2_ghz[j])) for i, j in index]
    results, timings = _evaluate_points(params, bandwidth_ghz, points, options)

    values = np.full((n1, n2), np.nan)
    eps_used, residual_max = [], 0.0
    for (i, j), (val, eps, res) in zip(index, results):
        values[i, j] = val
        if grid.is_square:
            values[j, i] = val
        if np.isfinite(val):
            eps_used.append(eps)
            residual_max = max(residual_max, res)
    masked = float(np.mean(~np.isfinite(values)))
    meta = {
        "params": params.to_dict(),
        "bandwidth_ghz": float(bandwidth_ghz),
        "tau_ns": 0.0,
        "tau_handling": "coincidence" if options.irf is None else "convolve-then-sample",
        "options": options.describe(),
        "mirrored": grid.is_square,
        "points_computed": len(points),
        "masked_fraction": masked,
        "epsilon_range": [min(eps_used), max(eps_used)] if eps_used else None,
        "max_residual": residual_max,
        "wall_time_s": time.perf_counter() - start,
        "point_time_total_s": float(np.sum(timings)),
    }
    result = SpectralMap2D(grid.nu1_ghz, grid.nu2_ghz, values, "tps", meta)
    if masked > options.max_masked_fraction:
        raise MaskedPointsError(f"{masked:.2%} of map points failed to converge")
    return result


def cs_map(
    params: EmitterParams,
    bandwidth_ghz: float,
    grid: MapGrid | None = None,
    options: MapOptions | None = None,
) -> SpectralMap2D:
    """Cauchy-Schwarz ratio R = g2(nu1,nu2)^2 / (g2(nu1,nu1) g2(nu2,nu2)).

    R > 1 marks photon pairs with nonclassical correlations.  The
    autocorrelations depend on one frequency each and are evaluated once per
    axis value (read off the diagonal of a square map).
    """
    options = options or MapOptions()
    grid = grid or MapGrid.default(params)
    tps = tps_map(params, bandwidth_ghz, grid, options)
    start = time.perf_counter()
    if grid.is_square:
        auto1 = auto2 = np.diag(tps.values).copy()
    else:
        job = CoincidencePoint(params, bandwidth_ghz, options)

        def autos(axis):
            res = run_parallel(job, [(float(v), float(v)) for v in axis], options.workers)
            return np.array([r[0] for r in res])

        auto1, auto2 = autos(grid.nu1_ghz), autos(grid.nu2_ghz)
    denom = np.outer(auto1, auto2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = tps.values**2 / denom
    vanishing = ~(np.abs(denom) >= CS_DENOMINATOR_FLOOR)
    ratio[vanishing] = np.nan
    masked = float(np.mean(~np.isfinite(ratio)))
    meta = dict(tps.metadata)
    meta.update(
        {
            "masked_fraction": masked,
            "masked_vanishing_autocorrelation": int(np.sum(vanishing & np.isfinite(tps.values))),
            "wall_time_s": tps.metadata["wall_time_s"] + time.perf_counter() - start,
        }
    )
    result = SpectralMap2D(grid.nu1_ghz, grid.nu2_ghz, ratio, "cs_ratio", meta)
    if masked > options.max_masked_fraction:
        raise MaskedPointsError(f"{masked:.2%} of map points are masked")
    return result
