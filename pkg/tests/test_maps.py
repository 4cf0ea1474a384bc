import math
import warnings

import numpy as np
import pytest

from tpspec import maps
from tpspec.correlations import FilterSpec, SensorConfig, filtered_g2_zero
from tpspec.emitter import EmitterParams
from tpspec.errors import MaskedPointsError, SensorBackActionWarning
from tpspec.maps import (
    CoincidencePoint,
    MapGrid,
    MapOptions,
    PointError,
    SpectralMap2D,
    cs_map,
    irf_tau_grid,
    run_parallel,
    tps_map,
)
from tpspec.postprocess import DiffusionSpec, IrfSpec

P22 = EmitterParams(2.2)


def _square(x):
    return x * x


def _fail_at_three(x):
    if x == 3:
        raise ValueError("boom")
    return x


def test_run_parallel_basics():
    assert run_parallel(_square, []) == []
    assert run_parallel(_square, [], return_timings=True) == ([], [])
    items = list(range(23))
    assert run_parallel(_square, items) == [i * i for i in items]
    assert run_parallel(_square, items, workers=3, chunksize=4) == [i * i for i in items]
    seen = []
    res, timings = run_parallel(_square, items, workers=2, progress=lambda d, t: seen.append((d, t)), return_timings=True)
    assert len(timings) == 23 and all(t >= 0 for t in timings)
    assert seen[-1] == (23, 23)


@pytest.mark.parametrize("workers", [1, 2])
def test_run_parallel_reports_failing_point(workers):
    with pytest.raises(PointError) as info:
        run_parallel(_fail_at_three, [1, 2, 3, 4], workers=workers)
    assert info.value.index == 2 and info.value.item == 3
    assert isinstance(info.value.cause, ValueError)
    assert "3" in str(info.value)


def test_map_type_validation():
    with pytest.raises(ValueError):
        SpectralMap2D([0, 1], [0, 1], np.zeros((2, 3)), "tps")
    with pytest.raises(ValueError):
        SpectralMap2D([0, 1], [0, 1], np.zeros((2, 2)), "other")
    m = SpectralMap2D([0, 1], [0, 1, 2], [[1, np.nan, 2], [3, 4, 5]], "tps")
    assert m.masked_fraction == pytest.approx(1 / 6)
    assert m.value_at(0.9, 2.2) == 5


def test_grids():
    g = MapGrid.default(P22, 5)
    assert g.nu1_ghz.tolist() == pytest.approx([-4.4, -2.2, 0, 2.2, 4.4])
    assert g.is_square
    assert not MapGrid(np.array([0.0, 1.0]), np.array([0.0, 2.0])).is_square
    with pytest.raises(ValueError):
        MapGrid.default(EmitterParams(0.0, 1.0))
    with pytest.raises(ValueError):
        MapGrid.square(0, 1.0)


def test_grid_guard():
    with pytest.raises(ValueError, match="limit"):
        tps_map(P22, 0.5, MapGrid.square(11, 1.0), MapOptions(max_grid=10))
    with pytest.raises(ValueError, match="ascending"):
        tps_map(P22, 0.5, MapGrid(np.array([1.0, 0.0]), np.array([0.0, 1.0])))


@pytest.fixture(scope="module")
def small_map():
    return tps_map(P22, 0.5, MapGrid.square(21, 4.4))


def test_tps_map_features(small_map):
    m = small_map
    assert m.kind == "tps"
    assert m.value_at(2.2, 2.2) < 1
    assert m.value_at(2.2, -2.2) > 1
    nu = m.nu1_grid_ghz[13]
    assert m.values[13, 13] == pytest.approx(filtered_g2_zero(P22, FilterSpec(nu, 0.5), FilterSpec(nu, 0.5)), rel=1e-12)
    assert np.all(m.values > 0)


def test_tps_map_symmetries(small_map):
    v = small_map.values
    assert np.array_equal(v, v.T)
    assert np.max(np.abs(v - v[::-1, ::-1])) < 1e-3


def test_tps_map_metadata(small_map):
    meta = small_map.metadata
    assert meta["mirrored"] and meta["points_computed"] == 21 * 22 // 2
    assert meta["masked_fraction"] == 0.0
    assert meta["max_residual"] < 1e-3
    assert meta["tau_handling"] == "coincidence"
    assert meta["bandwidth_ghz"] == 0.5 and meta["params"]["rabi_ghz"] == 2.2
    assert meta["wall_time_s"] > 0


def test_worker_count_does_not_change_values(small_map):
    parallel = tps_map(P22, 0.5, MapGrid.square(21, 4.4), MapOptions(workers=8))
    assert np.array_equal(parallel.values, small_map.values)


def test_detuned_map_breaks_antidiagonal_mirror():
    p = EmitterParams(1.6, 1.0)
    m = tps_map(p, 0.5, MapGrid.square(17, 3.2))
    v = m.values
    mirrored = v[::-1, ::-1].T  # (nu1, nu2) -> (-nu2, -nu1)
    assert np.max(np.abs(v - mirrored) / np.maximum(v, mirrored)) > 0.10


def test_non_square_grid():
    grid = MapGrid(np.array([-2.2, 0.0, 2.2]), np.array([-1.1, 1.1]))
    m = tps_map(P22, 0.5, grid)
    assert not m.metadata["mirrored"] and m.values.shape == (3, 2)
    assert m.values[2, 1] == pytest.approx(filtered_g2_zero(P22, FilterSpec(2.2, 0.5), FilterSpec(1.1, 0.5)), rel=1e-12)


def test_masked_points():
    bad = SensorConfig(epsilon_sequence=(3.0, 2.0), tolerance=1e-6)
    grid = MapGrid.square(3, 2.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SensorBackActionWarning)
        with pytest.raises(MaskedPointsError):
            tps_map(P22, 0.5, grid, MapOptions(sensor=bad))
        m = tps_map(P22, 0.5, grid, MapOptions(sensor=bad, max_masked_fraction=1.0))
    assert m.masked_fraction == 1.0 and np.all(m.mask)


def test_irf_tau_grid():
    taus = irf_tau_grid(P22, 0.5, IrfSpec(350))
    assert taus[taus.size // 2] == 0.0
    assert taus[-1] >= 3 * 0.35 - 1e-12 and np.allclose(taus, -taus[::-1])


def test_irf_point_value():
    point = CoincidencePoint(P22, 0.5, MapOptions(irf=IrfSpec(350)))
    value, eps, res = point((0.0, 0.0))
    # convolve-then-sample lowers the central pair slightly (1.2268 before convolution)
    assert value == pytest.approx(1.2150, abs=2e-4)
    assert eps > 0 and res < 1e-3


def test_diffusion_map_keeps_reflection_symmetry():
    m = tps_map(P22, 0.5, MapGrid.square(5, 2.2), MapOptions(diffusion=DiffusionSpec(1.0, 5)))
    assert np.max(np.abs(m.values - m.values[::-1, ::-1])) < 1e-3
    assert m.metadata["options"]["diffusion_width_ghz"] == 1.0


@pytest.fixture(scope="module")
def small_cs():
    return cs_map(P22, 0.5, MapGrid.square(21, 4.4))


def test_cs_map_diagonal_and_swap(small_cs):
    v = small_cs.values
    assert small_cs.kind == "cs_ratio"
    assert np.max(np.abs(np.diag(v) - 1)) < 1e-9
    assert np.array_equal(v, v.T)


def test_cs_map_matches_definition(small_cs, small_map):
    g = small_map.values
    i, j = 3, 15
    assert small_cs.values[i, j] == pytest.approx(g[i, j] ** 2 / (g[i, i] * g[j, j]), rel=1e-12)


def test_cs_map_non_square_uses_axis_autocorrelations(small_cs):
    axis1 = np.linspace(-4.4, 4.4, 21)[[2, 10]]
    axis2 = np.linspace(-4.4, 4.4, 21)[[5, 17, 19]]
    m = cs_map(P22, 0.5, MapGrid(axis1, axis2))
    assert np.allclose(m.values, small_cs.values[np.ix_([2, 10], [5, 17, 19])], rtol=1e-12)


def test_cs_map_masks_vanishing_denominators(monkeypatch):
    monkeypatch.setattr(maps, "CS_DENOMINATOR_FLOOR", 1e9)
    grid = MapGrid.square(3, 2.2)
    with pytest.raises(MaskedPointsError):
        cs_map(P22, 0.5, grid)
    m = cs_map(P22, 0.5, grid, MapOptions(max_masked_fraction=1.0))
    assert np.all(m.mask) and m.metadata["masked_vanishing_autocorrelation"] == 9


def test_cs_map_violations_beyond_sidebands(small_cs):
    nu1, nu2 = np.meshgrid(small_cs.nu1_grid_ghz, small_cs.nu2_grid_ghz, indexing="ij")
    beyond = np.maximum(np.abs(nu1), np.abs(nu2)) > P22.generalized_rabi_ghz
    assert np.any(small_cs.values[beyond] > 1)
    # the strongest violations sit in the sideband tails, not inside the triplet
    assert np.nanmax(small_cs.values[beyond]) > np.nanmax(small_cs.values[~beyond])


def test_cs_map_detuned_opposite_sidebands():
    p = EmitterParams(1.6, 1.0)
    om = p.generalized_rabi_ghz
    m = cs_map(p, 0.5, MapGrid(np.array([-om, om]), np.array([-om, om])))
    assert m.values[0, 1] > 1 and m.values[1, 0] > 1
