"""Covariance-based tomographic estimators (beamforming, Capon, MUSIC)."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .forward import ReflectivityVolume, SARStack
from .geometry import AcquisitionGeometry, GroundGrid, RadarGrid, cell_indices, steering_vector

METHODS = ("beamforming", "capon", "music")


def gaussian_window(size: int, std: float) -> np.ndarray:
    """Separable 2-D Gaussian weights of odd ``size`` (not normalized)."""
    r = np.arange(size) - size // 2
    g = np.exp(-0.5 * (r / std) ** 2)
    return np.outer(g, g)


def estimate_covariance(stack: SARStack, window_size: int = 7,
                        window_std: float = 1.5) -> np.ndarray:
    """Local sample covariance with Gaussian weights.

    Returns an array of shape ``(Naz, Nr, N, N)``. Weights are renormalized
    over the part of the window inside the image.
    """
    if window_size < 1 or window_size % 2 == 0:
        raise ValueError("window_size must be odd and positive")
    data = stack.data
    n, naz, nr = data.shape
    if window_size > naz or window_size > nr:
        raise ValueError(f"window {window_size} larger than image {naz}x{nr}")
    w = gaussian_window(window_size, window_std)
    norm = ndimage.correlate(np.ones((naz, nr)), w, mode="constant", cval=0.0)
    cov = np.empty((naz, nr, n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            prod = data[i] * np.conj(data[j])
            re = ndimage.correlate(prod.real, w, mode="constant", cval=0.0)
            im = ndimage.correlate(prod.imag, w, mode="constant", cval=0.0)
            cov[:, :, i, j] = (re + 1j * im) / norm
            cov[:, :, j, i] = np.conj(cov[:, :, i, j])
    return cov


def _check_hermitian(R: np.ndarray):
    R = np.asarray(R)
    scale = max(float(np.abs(R).max(initial=0.0)), 1e-300)
    if np.abs(R - np.conj(np.swapaxes(R, -1, -2))).max(initial=0.0) > 1e-8 * scale:
        raise ValueError("covariance matrix is not Hermitian")


def beamforming_profile(R: np.ndarray, geom: AcquisitionGeometry, z) -> np.ndarray:
    """Classical beamforming power ``a^H R a / N^2`` at heights ``z``.

    ``R`` may carry leading batch dimensions ``(..., N, N)``; the result
    then has shape ``(..., len(z))``.
    """
    _check_hermitian(R)
    A = steering_vector(geom, np.atleast_1d(z))
    n = geom.num_images
    p = np.einsum("nk,...nm,mk->...k", np.conj(A), R, A).real
    return p / n ** 2


def capon_profile(R: np.ndarray, geom: AcquisitionGeometry, z,
                  loading: float = 1e-3) -> np.ndarray:
    """Capon power ``1 / a^H (R + eps tr(R)/N I)^-1 a``.

    Raises ``np.linalg.LinAlgError`` when the loaded matrix is singular.
    """
    _check_hermitian(R)
    R = np.asarray(R)
    n = geom.num_images
    tr = np.trace(R, axis1=-2, axis2=-1).real
    load = loading * tr / n
    Rl = R + load[..., None, None] * np.eye(n)
    if np.any(np.linalg.cond(Rl) > 1e13):
        raise np.linalg.LinAlgError("loaded covariance is singular; increase the loading")
    A = steering_vector(geom, np.atleast_1d(z))
    X = np.linalg.solve(Rl, np.broadcast_to(A, Rl.shape[:-2] + A.shape))
    denom = np.einsum("nk,...nk->...k", np.conj(A), X).real
    return 1.0 / denom


def music_profile(R: np.ndarray, geom: AcquisitionGeometry, z, order: int = 2) -> np.ndarray:
    """MUSIC pseudo-spectrum ``1 / ||E_n^H a||^2`` for ``order`` scatterers."""
    _check_hermitian(R)
    n = geom.num_images
    if not 1 <= order < n:
        raise ValueError(f"model order must satisfy 1 <= D < N={n}")
    _, vecs = np.linalg.eigh(R)
    En = vecs[..., :, : n - order]
    A = steering_vector(geom, np.atleast_1d(z))
    proj = np.einsum("...nk,nz->...kz", np.conj(En), A)
    return 1.0 / np.sum(np.abs(proj) ** 2, axis=-2)


def profiles_to_ground(profiles: np.ndarray, z_samples, geom: AcquisitionGeometry,
                       rgrid: RadarGrid, grid: GroundGrid) -> np.ndarray:
    """Scatter per-cell height profiles back onto ground voxels.

    ``profiles`` has shape ``(Naz, Nr, len(z_samples))``; each voxel takes
    the profile value of its radar cell at its own height. Voxels whose
    height is not among ``z_samples`` or that fall outside the swath get 0.
    """
    z_samples = np.asarray(z_samples, dtype=float)
    cells = cell_indices(geom, rgrid, grid)
    flat = profiles.reshape(-1, z_samples.size)
    zi = np.searchsorted(z_samples, grid.z)
    zi = np.clip(zi, 0, z_samples.size - 1)
    hit = np.isclose(z_samples[zi], grid.z, atol=1e-9 * max(1.0, abs(grid.z).max()))
    out = np.zeros(grid.shape, dtype=profiles.dtype)
    ok = (cells >= 0) & hit[None, None, :]
    kz = np.broadcast_to(zi[None, None, :], grid.shape)
    out[ok] = flat[cells[ok], kz[ok]]
    return out


def spectral_volume(stack: SARStack, geom: AcquisitionGeometry, rgrid: RadarGrid,
                    grid: GroundGrid, method: str = "beamforming",
                    window_size: int = 7, window_std: float = 1.5,
                    loading: float = 1e-3, order: int = 2,
                    covariance: np.ndarray | None = None) -> ReflectivityVolume:
    """Tomographic magnitude volume from per-pixel spectral estimation.

    Profiles are evaluated at the grid's z levels and stored as amplitudes
    (square root of the estimated power).
    """
    if method not in METHODS:
        raise ValueError(f"unknown spectral method {method!r}; expected one of {METHODS}")
    if covariance is None:
        covariance = estimate_covariance(stack, window_size, window_std)
    z = grid.z
    if method == "beamforming":
        prof = beamforming_profile(covariance, geom, z)
    elif method == "capon":
        zero = np.trace(covariance, axis1=-2, axis2=-1).real <= 0
        prof = np.zeros(covariance.shape[:2] + (z.size,))
        if np.any(~zero):
            prof[~zero] = capon_profile(covariance[~zero], geom, z, loading)
    else:
        zero = np.trace(covariance, axis1=-2, axis2=-1).real <= 0
        prof = np.zeros(covariance.shape[:2] + (z.size,))
        if np.any(~zero):
            prof[~zero] = music_profile(covariance[~zero], geom, z, order)
    amp = np.sqrt(np.maximum(prof, 0.0))
    return ReflectivityVolume(profiles_to_ground(amp, z, geom, rgrid, grid), grid)

