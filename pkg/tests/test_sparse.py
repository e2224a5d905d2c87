import math

import numpy as np
import pytest

from tomosurf import (AcquisitionGeometry, GroundGrid, RadarGrid, SolverParams,
                      invert_cs_per_cell, invert_l1_3d, kkt_residual, operator_norm_sq,
                      soft_threshold, steering_vector)
from tomosurf.estimators import profiles_to_ground
from tomosurf.forward import ReflectivityVolume, SARStack, apply_phi
from tomosurf.geometry import cell_indices, radar_grid_covering
from tomosurf.sparse import DivergenceError, _proximal_gradient

GEOM = AcquisitionGeometry(tuple(np.linspace(-400, 400, 8)), 0.031, 0.6, 6e5)
FLAT = AcquisitionGeometry(GEOM.baselines, 0.031, math.pi / 2, 6e5)
TIGHT = SolverParams(20000, 1e-13, kkt_tolerance=1e-7)


def random_stack(rg, seed=0, n=8):
    rng = np.random.default_rng(seed)
    shape = (n,) + rg.shape
    return SARStack(rng.normal(size=shape) + 1j * rng.normal(size=shape), rg)


def test_soft_threshold_examples():
    assert soft_threshold(3 + 4j, 1.0) == pytest.approx((3 + 4j) * 0.8)
    assert soft_threshold(0.5, 1.0) == 0
    assert soft_threshold(-2.0, 0.5) == pytest.approx(-1.5)
    assert soft_threshold(2j, 2.0) == 0
    assert soft_threshold(0.0, 0.0) == 0
    x = np.array([1 + 1j, 5.0, -3j])
    assert np.array_equal(soft_threshold(x, 0.0), x)
    with pytest.raises(ValueError):
        soft_threshold(x, -1.0)


def test_soft_threshold_shrinks_magnitude_keeps_phase():
    rng = np.random.default_rng(0)
    x = rng.normal(size=200) + 1j * rng.normal(size=200)
    y = soft_threshold(x, 0.7)
    assert np.allclose(np.abs(y), np.maximum(np.abs(x) - 0.7, 0))
    on = np.abs(y) > 0
    assert np.allclose(np.angle(y[on]), np.angle(x[on]))


def test_operator_norm_matches_per_cell_blocks():
    grid = GroundGrid((3, 6, 5), (1.0, 1.0, 1.5))
    rg = radar_grid_covering(GEOM, grid)
    cells = cell_indices(GEOM, rg, grid)
    Zs = grid.mesh()[2]
    best = 0.0
    for c in np.unique(cells[cells >= 0]):
        A = steering_vector(GEOM, Zs[cells == c])
        best = max(best, np.linalg.norm(A, 2) ** 2)
    assert operator_norm_sq(GEOM, rg, grid, 300) == pytest.approx(best, rel=1e-6)
    with pytest.raises(ValueError):
        operator_norm_sq(GEOM, rg, grid, 5)


def test_huge_mu_gives_zero():
    grid = GroundGrid((3, 5, 5))
    rg = radar_grid_covering(GEOM, grid)
    stack = random_stack(rg)
    u = invert_l1_3d(stack, GEOM, rg, grid, 1e6)
    assert not u.values.any()


def test_zero_mu_is_least_squares():
    z = np.array([0.0, 4.0, 9.0])
    rg = RadarGrid(2, 3, 1.0, 1.0, 6e5)
    stack = random_stack(rg, seed=1)
    prof = invert_cs_per_cell(stack, GEOM, rg, z, 0.0, SolverParams(20000, 1e-15))
    A = steering_vector(GEOM, z)
    ls = np.linalg.lstsq(A, stack.data.reshape(8, -1), rcond=None)[0]
    assert np.allclose(prof.reshape(-1, 3).T, ls, atol=1e-6)


def test_phase_equivariance():
    grid = GroundGrid((2, 4, 6))
    rg = radar_grid_covering(GEOM, grid)
    stack = random_stack(rg, seed=2)
    rot = np.exp(0.8j)
    p = SolverParams(400, 1e-10)
    a = invert_l1_3d(stack, GEOM, rg, grid, 2.0, p).values
    b = invert_l1_3d(SARStack(rot * stack.data, rg), GEOM, rg, grid, 2.0, p).values
    assert np.allclose(b, rot * a, atol=1e-10)


def test_support_shrinks_with_mu():
    grid = GroundGrid((3, 6, 6))
    rg = radar_grid_covering(GEOM, grid)
    stack = random_stack(rg, seed=4)
    sizes = [np.count_nonzero(invert_l1_3d(stack, GEOM, rg, grid, mu, TIGHT).values)
             for mu in (0.5, 2.0, 8.0, 30.0)]
    assert sizes == sorted(sizes, reverse=True)
    assert sizes[0] > sizes[-1]


def test_cs_per_cell_equals_l1_3d_for_horizontal_look():
    grid = GroundGrid((3, 4, 6))
    rg = RadarGrid(3, 4, 1.0, 1.0, 6e5)
    stack = random_stack(rg, seed=6)
    mu = 3.0
    u = invert_l1_3d(stack, FLAT, rg, grid, mu, TIGHT)
    prof = invert_cs_per_cell(stack, FLAT, rg, grid.z, mu, TIGHT)
    assert np.allclose(profiles_to_ground(prof, grid.z, FLAT, rg, grid), u.values, atol=1e-6)


def test_kkt_residual_at_solution_and_info():
    grid = GroundGrid((2, 5, 5))
    rg = radar_grid_covering(GEOM, grid)
    stack = random_stack(rg, seed=8)
    mu = np.full(grid.shape, 2.0)
    mu[0] = 5.0
    u, info = invert_l1_3d(stack, GEOM, rg, grid, mu, TIGHT, return_info=True)
    assert info["kkt"] == pytest.approx(kkt_residual(u, stack, GEOM, rg, grid, mu))
    assert info["kkt"] <= 1e-6 * mu.mean() * 10
    assert info["iterations"] == len(info["objective"]) - 1
    zero = ReflectivityVolume(np.zeros(grid.shape, complex), grid)
    assert kkt_residual(zero, stack, GEOM, rg, grid, mu) > 0


def test_warm_start_from_solution_stops_at_once():
    grid = GroundGrid((2, 4, 4))
    rg = radar_grid_covering(GEOM, grid)
    stack = random_stack(rg, seed=9)
    u = invert_l1_3d(stack, GEOM, rg, grid, 1.0, TIGHT)
    _, info = invert_l1_3d(stack, GEOM, rg, grid, 1.0, SolverParams(1000, 1e-8), x0=u.values,
                           return_info=True)
    assert info["iterations"] <= 2


def test_noiseless_single_scatterer_is_recovered():
    grid = GroundGrid((2, 5, 6))
    rg = radar_grid_covering(GEOM, grid)
    x = np.zeros(grid.shape, complex)
    x[1, 2, 3] = 2 * np.exp(0.4j)
    stack = apply_phi(ReflectivityVolume(x, grid), GEOM, rg)
    u = invert_l1_3d(stack, GEOM, rg, grid, 0.05, TIGHT).values
    assert np.unravel_index(np.argmax(np.abs(u)), grid.shape) == (1, 2, 3)
    assert np.angle(u[1, 2, 3]) == pytest.approx(0.4, abs=1e-6)


def test_invalid_inputs():
    grid = GroundGrid((2, 3, 3))
    rg = radar_grid_covering(GEOM, grid)
    stack = random_stack(rg)
    with pytest.raises(ValueError):
        invert_l1_3d(stack, GEOM, rg, grid, -1.0)
    with pytest.raises(ValueError):
        invert_l1_3d(stack, GEOM, rg, grid, np.nan)
    with pytest.raises(ValueError):
        invert_cs_per_cell(stack, GEOM, rg, grid.z, -0.1)
    for kw in (dict(max_iterations=0), dict(tolerance=0.0), dict(safety=1.5),
               dict(kkt_tolerance=0.0)):
        with pytest.raises(ValueError):
            SolverParams(**kw)


def test_too_long_step_diverges():
    A = np.array([[1.0, 0.0], [0.0, 1.0]])
    v = np.array([1.0, 1.0])
    with pytest.raises(DivergenceError):
        # a Lipschitz guess 20x too small makes the gradient step explode
        _proximal_gradient(lambda x: A @ x, lambda r: A.T @ r, v, 0.0, 0.1,
                           SolverParams(100, 1e-12, accelerated=False, safety=1.0), shape=(2,))
