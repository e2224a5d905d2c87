import math

import numpy as np
import pytest

from tomosurf import (AcquisitionGeometry, ElevationMap, GroundGrid, cumulative_profiles,
                      data_penalty, segment_surface, surface_energy)
from tomosurf.surface import fill_shadow, geometric_shadow
from tomosurf.segmentation import (build_graph, penalty_curve, remove_shadows, shadow_mask,
                                   voxel_capacities)
from tomosurf.geometry import resample_to_rays

FLAT = AcquisitionGeometry((0.0, 50.0), 0.031, math.pi / 2, 6e5)
GEOM = AcquisitionGeometry((0.0, 50.0), 0.031, math.pi / 4, 6e5)


def direct_penalty(p, r):
    # sum over s of |C-(s) - C+(s)| on the wrong side of r, straight from the definition
    total = 0.0
    for s in range(len(p)):
        cm = sum(p[: s + 1])
        cp = sum(p[s + 1:])
        total += max(cm - cp, 0) if s < r else max(cp - cm, 0)
    return total


def test_profiles_examples():
    prof = cumulative_profiles(np.array([1.0, 0.0, 2.0, 1.0]))
    assert prof.before.tolist() == [1, 1, 3, 4]
    assert prof.after.tolist() == [3, 3, 1, 0]
    assert int(prof.equilibrium) == 2
    with pytest.raises(ValueError):
        cumulative_profiles(np.zeros(0))
    with pytest.raises(ValueError):
        cumulative_profiles(np.array([1.0, -1.0]))


def test_penalty_against_direct_sums():
    rng = np.random.default_rng(0)
    for _ in range(30):
        p = rng.random(int(rng.integers(1, 12)))
        prof = cumulative_profiles(p)
        curve = penalty_curve(prof)
        for r in range(p.size):
            assert data_penalty(prof, (), r) == pytest.approx(direct_penalty(p, r))
            assert curve[r] == pytest.approx(direct_penalty(p, r))
    with pytest.raises(IndexError):
        data_penalty(cumulative_profiles(np.ones(3)), (), 3)


def test_point_mass_column_minimum():
    p = np.zeros(9)
    p[5] = 2.0
    prof = cumulative_profiles(p)
    curve = penalty_curve(prof)
    assert curve[5] == 0.0
    assert int(prof.equilibrium) == 5
    assert np.all(curve[:5] > 0) and np.all(curve[6:] > 0)


def test_step_scales_penalty():
    p = np.array([0.5, 1.0, 0.2])
    a = penalty_curve(cumulative_profiles(p))
    b = penalty_curve(cumulative_profiles(p, step=2.0))
    assert np.allclose(b, 4 * a)


def test_zero_beta_columns_are_independent():
    # horizontal rays: ray (ix, j) is the row mags[ix, :, j], so every
    # sample is one voxel and each column can be solved on its own
    rng = np.random.default_rng(1)
    grid = GroundGrid((3, 4, 7))
    mags = rng.random(grid.shape)
    emap = segment_surface(mags, FLAT, grid, 0.0)
    for ix in range(3):
        air = np.zeros((4, 7))
        inn = np.zeros((4, 7))
        for j in range(7):
            row = mags[ix, :, j]
            for k in range(4):
                cm, cp = row[: k + 1].sum(), row[k + 1:].sum()
                air[k, j], inn[k, j] = max(cm - cp, 0), max(cp - cm, 0)
        for iy in range(4):
            cost = [inn[iy, : L + 1].sum() + air[iy, L + 1:].sum() for L in range(7)]
            best = int(np.flatnonzero(np.array(cost) <= min(cost) + 1e-12)[0])
            assert emap.levels[ix, iy] == best


def test_huge_beta_gives_flat_map():
    rng = np.random.default_rng(2)
    grid = GroundGrid((4, 5, 6))
    mags = rng.random(grid.shape)
    emap = segment_surface(mags, GEOM, grid, 1e6)
    assert np.unique(emap.levels).size == 1


def test_smoothness_nonincreasing_in_beta():
    rng = np.random.default_rng(3)
    grid = GroundGrid((5, 6, 6))
    mags = rng.random(grid.shape) ** 3
    walls = []
    for beta in (0.0, 0.1, 0.5, 2.0, 10.0):
        lv = segment_surface(mags, GEOM, grid, beta).levels
        walls.append(np.abs(np.diff(lv, axis=0)).sum() + np.abs(np.diff(lv, axis=1)).sum())
    assert walls == sorted(walls, reverse=True)


def test_cut_value_equals_energy():
    rng = np.random.default_rng(4)
    grid = GroundGrid((3, 5, 5))
    mags = rng.random(grid.shape)
    emap, cut = segment_surface(mags, GEOM, grid, 0.7, return_cut=True)
    assert cut.flow == pytest.approx(surface_energy(emap, mags, GEOM, grid, 0.7))


def test_capacities_split_total_penalty():
    rng = np.random.default_rng(5)
    grid = GroundGrid((2, 4, 4))
    rays = resample_to_rays(rng.random(grid.shape), GEOM, grid)
    prof = cumulative_profiles(rays)
    cs, ct = voxel_capacities(rays, prof)
    valid = rays.valid
    assert cs.sum() == pytest.approx(prof.air_cost[:, valid].sum())
    assert ct.sum() == pytest.approx(prof.interior_cost[:, valid].sum())
    with pytest.raises(ValueError):
        build_graph(rays.back_project(), GEOM, grid, -1.0)


def test_geometric_shadow_behind_block():
    theta = math.pi / 4
    geom = AcquisitionGeometry((0.0, 50.0), 0.031, theta, 6e5)
    grid = GroundGrid((1, 12, 8))
    h = np.zeros((1, 12))
    h[0, 3] = 4.0
    shadow = geometric_shadow(ElevationMap(h, grid), geom)
    # at 45 degrees a 4 m block hides the next 4 m of ground (the 4th one grazes)
    assert shadow[0].tolist() == [False] * 4 + [True] * 3 + [False] * 5
    assert not geometric_shadow(ElevationMap(h, grid), FLAT)[0, :3].any()


def test_fill_shadow_examples():
    h = np.array([[0.0, 5.0, 9.0, 9.0, 2.0, 3.0]])
    s = np.array([[False, False, True, True, False, False]])
    assert fill_shadow(h, s).tolist() == [[0, 5, 2, 2, 2, 3]]
    s2 = np.array([[False, False, False, False, True, True]])
    assert fill_shadow(h, s2).tolist() == [[0, 5, 9, 9, 9, 9]]
    assert np.array_equal(fill_shadow(h, np.ones_like(s)), h)


def test_shadow_threshold_and_remove():
    geom = AcquisitionGeometry((0.0, 50.0), 0.031, math.pi / 4, 6e5)
    grid = GroundGrid((1, 12, 8))
    h = np.zeros((1, 12))
    h[0, 3] = 4.0
    emap = ElevationMap(h, grid)
    geo = geometric_shadow(emap, geom)
    assert np.array_equal(shadow_mask(emap, geom), geo)
    mags = np.ones(grid.shape)
    # a stricter threshold can only drop columns from the mask
    loose = shadow_mask(emap, geom, mags, 0.5)
    strict = shadow_mask(emap, geom, mags, 0.999)
    assert np.all(strict <= loose) and np.all(loose <= geo)
    out = remove_shadows(emap, geom)
    assert np.array_equal(out.valid, ~geo)
    assert np.all(out.heights[0, 4:7] == 0.0)
