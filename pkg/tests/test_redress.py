import numpy as np
import pytest

from tomosurf import ElevationMap, GroundGrid, RedressParams, SolverParams, mu_map, redress
from tomosurf.redress import distance_to_surface, off_surface_support, surface_voxel_mask
from tomosurf.forward import ReflectivityVolume, simulate_stack
from tomosurf.geometry import radar_grid_covering
from tomosurf.io import read_surface_csv

from scenes import small_scene

GRID = GroundGrid((4, 5, 6))


def flat(level=0, grid=GRID):
    return ElevationMap.from_levels(np.full(grid.shape[:2], level), grid)


def test_mu_map_examples():
    p = RedressParams(n=5, mu0=0.5, b=2.0)
    emap = flat()
    assert np.all(mu_map(emap, 0, p) == 0.5)
    d = distance_to_surface(emap)
    # flat surface at level 0: distance is the height above it
    assert np.array_equal(d, np.broadcast_to(np.arange(6.0), GRID.shape))
    mu = mu_map(emap, 4, p)
    assert mu[0, 0, 4] == pytest.approx(0.5 + 2.0 / 16 * (4 / 1 * 4) ** 2)
    assert np.all(mu[:, :, 0] == 0.5)
    # k = n-1 and d = n-1 gives mu0 + b (n-1)^2
    assert mu[0, 0, 4] == pytest.approx(0.5 + 2.0 * 16)
    with pytest.raises(ValueError):
        mu_map(emap, 5, p)
    with pytest.raises(ValueError):
        mu_map(emap, -1, p)


def test_mu_map_monotone():
    p = RedressParams(n=6, mu0=0.1, b=1.0)
    emap = flat(2)
    maps = [mu_map(emap, k, p) for k in range(6)]
    for a, b in zip(maps, maps[1:]):
        assert np.all(b >= a)
    d = distance_to_surface(emap)
    m = maps[3]
    order = np.argsort(d.ravel())
    assert np.all(np.diff(m.ravel()[order]) >= 0)
    assert np.all(mu_map(emap, 3, RedressParams(n=6, mu0=0.1, b=0.0)) == 0.1)


def test_surface_voxels_include_walls():
    lv = np.zeros((4, 5), int)
    lv[1:4, 1:4] = 4
    mask = surface_voxel_mask(ElevationMap.from_levels(lv, GRID))
    # edge column: the wall above the ground plus the top
    assert mask[1, 1, 1:5].all() and not mask[1, 1, 0]
    # column surrounded by roof: top only
    assert mask[2, 2, 4] and not mask[2, 2, :4].any()
    # the grid border is not air
    assert mask[3, 2, 4] and not mask[3, 2, :4].any()
    assert mask.sum() == 7 * 4 + 2 + 11
    assert not mask[:, :, 5].any()


def test_params_validation():
    for kw in (dict(n=1), dict(mu0=-1.0), dict(b=np.inf), dict(beta=-0.1)):
        with pytest.raises(ValueError):
            RedressParams(**kw)


def test_redress_run_and_checkpoints(tmp_path):
    geom, grid, rg, vol, truth = small_scene(0)
    stack = simulate_stack(vol, geom, rg, 0.0, 0)
    p = RedressParams(n=3, mu0=0.5, b=0.5, beta=0.5, solver=SolverParams(60, 1e-8))
    u, emap, hist = redress(stack, geom, rg, grid, p, checkpoint_dir=tmp_path,
                            return_history=True)
    assert [h.k for h in hist] == [0, 1, 2]
    assert np.all(hist[0].mu == 0.5)
    assert np.array_equal(hist[-1].surface.heights, emap.heights)
    for k in range(3):
        d = tmp_path / f"iter_{k}"
        assert {f.name for f in d.iterdir()} == {"volume.bin", "mu.bin", "surface.csv"}
        assert np.array_equal(read_surface_csv(d / "surface.csv", grid).heights,
                              hist[k].surface.heights)
    text = (tmp_path / "manifest.txt").read_text()
    assert "n=3" in text and "iter_2.energy=" in text


def test_off_surface_support_counts():
    emap = flat(1)
    v = np.zeros(GRID.shape, complex)
    v[0, 0, 1] = 1
    v[0, 0, 3] = 1
    v[1, 1, 5] = 1
    vol = ReflectivityVolume(v, GRID)
    assert off_surface_support(vol, emap) == 2
    assert off_surface_support(vol, emap, radius=2.0) == 1
