import math

import numpy as np
import pytest

from tomosurf import (AcquisitionGeometry, GroundGrid, RadarGrid, beamforming_profile,
                      capon_profile, estimate_covariance, music_profile, steering_vector)
from tomosurf.estimators import profiles_to_ground, spectral_volume
from tomosurf.forward import SARStack

GEOM = AcquisitionGeometry(tuple(np.linspace(-400, 400, 8)), 0.031, 0.6, 6e5)
Z = np.linspace(-20, 20, 401)


def random_stack(shape=(9, 11), n=8, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(n,) + shape) + 1j * rng.normal(size=(n,) + shape)
    return SARStack(data, RadarGrid(shape[0], shape[1], 1.0, 1.0, 6e5))


def test_covariance_matches_double_loop():
    stack = random_stack()
    size, std = 5, 1.2
    R = estimate_covariance(stack, size, std)
    r = np.arange(size) - size // 2
    w1 = np.exp(-0.5 * (r / std) ** 2)
    n, naz, nr = stack.data.shape
    for a, b in [(0, 0), (4, 5), (8, 10), (1, 9)]:
        acc = np.zeros((n, n), complex)
        wsum = 0.0
        for da in range(size):
            for db in range(size):
                aa, bb = a + r[da], b + r[db]
                if 0 <= aa < naz and 0 <= bb < nr:
                    w = w1[da] * w1[db]
                    v = stack.data[:, aa, bb]
                    acc += w * np.outer(v, np.conj(v))
                    wsum += w
        assert np.allclose(R[a, b], acc / wsum, atol=1e-12)


def test_covariance_is_psd_hermitian():
    R = estimate_covariance(random_stack(seed=3), 3, 1.0)
    assert np.allclose(R, np.conj(np.swapaxes(R, -1, -2)))
    assert np.linalg.eigvalsh(R).min() > -1e-10


def test_covariance_window_errors():
    with pytest.raises(ValueError):
        estimate_covariance(random_stack(), 4)
    with pytest.raises(ValueError):
        estimate_covariance(random_stack(shape=(3, 3)), 5)


def test_identity_covariance():
    N = GEOM.num_images
    R = np.eye(N)
    assert np.allclose(beamforming_profile(R, GEOM, Z), 1.0 / N)
    eps = 1e-3
    assert np.allclose(capon_profile(R, GEOM, Z, loading=eps), (1 + eps) / N)


def test_rank_one_peak():
    z0 = 3.0
    a = steering_vector(GEOM, z0)
    R = np.outer(a, np.conj(a))
    bf = beamforming_profile(R, GEOM, Z)
    assert bf.max() == pytest.approx(1.0)
    assert Z[np.argmax(bf)] == pytest.approx(z0)
    cap = capon_profile(R + 1e-2 * np.eye(8), GEOM, Z)
    assert Z[np.argmax(cap)] == pytest.approx(z0)
    mus = music_profile(R + 1e-3 * np.eye(8), GEOM, Z, order=1)
    assert Z[np.argmax(mus)] == pytest.approx(z0)


def test_scale_invariances():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(8, 30)) + 1j * rng.normal(size=(8, 30))
    R = X @ np.conj(X.T) / 30
    c = 3.5
    assert np.allclose(beamforming_profile(c * R, GEOM, Z), c * beamforming_profile(R, GEOM, Z))
    assert np.allclose(capon_profile(c * R, GEOM, Z), c * capon_profile(R, GEOM, Z))
    assert np.allclose(music_profile(c * R, GEOM, Z), music_profile(R, GEOM, Z))


def test_profiles_nonnegative_and_batched():
    stack = random_stack(seed=5)
    R = estimate_covariance(stack, 3, 1.0)
    bf = beamforming_profile(R, GEOM, Z[:10])
    assert bf.shape == (9, 11, 10)
    assert bf.min() >= 0
    assert np.allclose(bf[2, 3], beamforming_profile(R[2, 3], GEOM, Z[:10]))
    assert capon_profile(R, GEOM, Z[:10]).min() > 0


def test_estimator_errors():
    R = np.eye(8)
    with pytest.raises(ValueError):
        music_profile(R, GEOM, Z, order=8)
    with pytest.raises(ValueError):
        music_profile(R, GEOM, Z, order=0)
    bad = np.eye(8, dtype=complex)
    bad[0, 1] = 1.0
    with pytest.raises(ValueError):
        beamforming_profile(bad, GEOM, Z)
    with pytest.raises(np.linalg.LinAlgError):
        capon_profile(np.zeros((8, 8)) + 0j, GEOM, Z, loading=0.0)


def test_spectral_volume_horizontal_look():
    # at theta = pi/2 each radar cell holds one vertical voxel column
    geom = AcquisitionGeometry(GEOM.baselines, 0.031, math.pi / 2, 6e5)
    grid = GroundGrid((5, 6, 7))
    rg = RadarGrid(5, 6, 1.0, 1.0, 6e5)
    stack = random_stack(shape=(5, 6), seed=7)
    vol = spectral_volume(stack, geom, rg, grid, "beamforming", 3, 1.0)
    R = estimate_covariance(stack, 3, 1.0)
    expected = np.sqrt(beamforming_profile(R, geom, grid.z))
    assert np.allclose(vol.values, expected)
    with pytest.raises(ValueError):
        spectral_volume(stack, geom, rg, grid, "wsf")


def test_profiles_to_ground_off_grid_heights_are_zero():
    geom = AcquisitionGeometry(GEOM.baselines, 0.031, math.pi / 2, 6e5)
    grid = GroundGrid((2, 3, 4))
    rg = RadarGrid(2, 3, 1.0, 1.0, 6e5)
    prof = np.ones((2, 3, 2))
    out = profiles_to_ground(prof, [0.0, 2.0], geom, rg, grid)
    assert np.array_equal(out[:, :, [0, 2]], np.ones((2, 3, 2)))
    assert not out[:, :, [1, 3]].any()
