"""Acquisition geometry, sampling grids and the ground <-> radar mappings.

Coordinates follow the usual side-looking convention: ``x`` is azimuth,
``y`` is ground range (increasing away from the sensor) and ``z`` is height.
Slant range uses a flat-wavefront model::

    rho(y, z) = r0 + y * sin(theta) - z * cos(theta)

Rays from the sensor travel along ``(sin(theta), -cos(theta))`` in the
``(y, z)`` plane; the perpendicular elevation coordinate is
``h = y * cos(theta) + z * sin(theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

# Slack used when deciding on which side of a bin boundary a value falls.
_BOUNDARY_EPS = 1e-9


def _trig(theta: float) -> tuple[float, float]:
    """sin/cos of the incidence with the right-angle limit made exact."""
    s, c = math.sin(theta), math.cos(theta)
    if abs(c) < 1e-12:
        c = 0.0
    if abs(s - 1.0) < 1e-15:
        s = 1.0
    return s, c


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Multi-baseline acquisition parameters.

    ``baselines`` are perpendicular baselines in meters, the master first.
    ``incidence`` is in radians.
    """

    baselines: tuple[float, ...]
    wavelength: float
    incidence: float
    reference_range: float

    def __post_init__(self):
        b = tuple(float(v) for v in np.atleast_1d(self.baselines))
        object.__setattr__(self, "baselines", b)
        if len(b) < 2:
            raise ValueError("need at least two images")
        if not all(math.isfinite(v) for v in b):
            raise ValueError("baselines must be finite")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        # pi/2 is admitted as the grazing limit (horizontal rays).
        if not 0 < self.incidence <= math.pi / 2:
            raise ValueError("incidence must lie in (0, pi/2]")
        if not self.reference_range > 0:
            raise ValueError("reference range must be positive")

    @property
    def num_images(self) -> int:
        return len(self.baselines)

    @property
    def xi(self) -> np.ndarray:
        """Height-to-phase factors of all images (rad/m)."""
        s, _ = _trig(self.incidence)
        scale = 4 * math.pi / (self.wavelength * self.reference_range * s)
        return scale * np.asarray(self.baselines)

    def rayleigh_resolution(self) -> float:
        """Height resolution 2*pi / (xi span) in meters."""
        xi = self.xi
        return 2 * math.pi / (xi.max() - xi.min())


@dataclass(frozen=True)
class GroundGrid:
    """Regular voxel grid in ground geometry; values sit at voxel centers."""

    shape: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "spacing", tuple(float(d) for d in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if len(self.shape) != 3 or min(self.shape) < 1:
            raise ValueError(f"invalid grid shape {self.shape}")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise ValueError(f"invalid grid spacing {self.spacing}")

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing[k] * np.arange(self.shape[k])

    @property
    def x(self) -> np.ndarray:
        return self.axis(0)

    @property
    def y(self) -> np.ndarray:
        return self.axis(1)

    @property
    def z(self) -> np.ndarray:
        return self.axis(2)

    @property
    def z_top(self) -> float:
        return self.origin[2] + (self.shape[2] - 1) * self.spacing[2]

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, self.z, indexing="ij")

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.spacing))


@dataclass(frozen=True)
class RadarGrid:
    """Azimuth/range sampling of the SAR images (bin centers)."""

    azimuth_count: int
    range_count: int
    azimuth_spacing: float
    range_spacing: float
    range_origin: float
    azimuth_origin: float = 0.0

    def __post_init__(self):
        if self.azimuth_count < 1 or self.range_count < 1:
            raise ValueError("radar grid counts must be >= 1")
        if self.azimuth_spacing <= 0 or self.range_spacing <= 0:
            raise ValueError("radar grid spacings must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.azimuth_count, self.range_count)

    @property
    def ranges(self) -> np.ndarray:
        return self.range_origin + self.range_spacing * np.arange(self.range_count)


def radar_grid_covering(geom: AcquisitionGeometry, grid: GroundGrid,
                        range_spacing: float | None = None) -> RadarGrid:
    """Smallest radar grid whose range bins cover every voxel of ``grid``.

    Azimuth bins coincide with the grid's x samples.
    """
    if range_spacing is None:
        s, _ = _trig(geom.incidence)
        range_spacing = grid.spacing[1] * s
    Y, Z = np.meshgrid(grid.y, grid.z, indexing="ij")
    rho = slant_range(geom, Y, Z)
    lo, hi = rho.min(), rho.max()
    count = int(math.floor((hi - lo) / range_spacing + 0.5 + _BOUNDARY_EPS)) + 1
    return RadarGrid(grid.shape[0], count, grid.spacing[0], range_spacing,
                     range_origin=lo, azimuth_origin=grid.origin[0])


def spatial_frequency(geom: AcquisitionGeometry, n: int) -> float:
    """Height-to-phase factor xi_n = 4 pi b_n / (lambda r0 sin theta).

    ``n`` is a zero-based image index.
    """
    if not 0 <= n < geom.num_images:
        raise IndexError(f"image index {n} out of range [0, {geom.num_images})")
    return float(geom.xi[n])


def slant_range(geom: AcquisitionGeometry, y, z):
    s, c = _trig(geom.incidence)
    return geom.reference_range + np.multiply(y, s) - np.multiply(z, c)


def steering_vector(geom: AcquisitionGeometry, z) -> np.ndarray:
    """Steering vector ``exp(-j xi_n z)``.

    Scalar ``z`` gives shape (N,); an array of heights gives the steering
    matrix of shape (N, len(z)).
    """
    z = np.asarray(z, dtype=float)
    phase = np.multiply.outer(geom.xi, z)
    return np.exp(-1j * phase)


def _bin_index(value, origin, step):
    # |value - (origin + i*step)| <= step/2, ties go to the lower bin
    t = (np.asarray(value, dtype=float) - origin) / step
    return np.ceil(t - 0.5 - _BOUNDARY_EPS).astype(np.int64)


def radar_cell_of(geom: AcquisitionGeometry, rgrid: RadarGrid, voxel):
    """Radar cell ``(azimuth_index, range_index)`` of a ground point, or None.

    ``voxel`` is an ``(x, y, z)`` position in meters.
    """
    x, y, z = voxel
    ia = int(_bin_index(x, rgrid.azimuth_origin, rgrid.azimuth_spacing))
    ir = int(_bin_index(slant_range(geom, y, z), rgrid.range_origin,
                        rgrid.range_spacing))
    if not (0 <= ia < rgrid.azimuth_count and 0 <= ir < rgrid.range_count):
        return None
    return ia, ir


def cell_indices(geom: AcquisitionGeometry, rgrid: RadarGrid,
                 grid: GroundGrid) -> np.ndarray:
    """Flat radar cell index ``ia * range_count + ir`` of every voxel.

    Shape equals ``grid.shape``; voxels outside the swath get -1.
    """
    X, Y, Z = grid.mesh()
    ia = _bin_index(X, rgrid.azimuth_origin, rgrid.azimuth_spacing)
    ir = _bin_index(slant_range(geom, Y, Z), rgrid.range_origin, rgrid.range_spacing)
    inside = ((ia >= 0) & (ia < rgrid.azimuth_count)
              & (ir >= 0) & (ir < rgrid.range_count))
    return np.where(inside, ia * rgrid.range_count + ir, -1)


@dataclass(frozen=True)
class RayVolume:
    """A volume resampled along sensor rays.

    ``values[ix, j, k]`` is the sample of ray column ``(ix, j)`` at slant
    range ``ranges[k]``. The sampling pattern does not depend on ``ix``.

    Attributes
    ----------
    valid : (Nh, Nr) bool
        Samples lying inside the ground grid's cell box.
    voxel_of_sample : (Nh, Nr, 2) int
        Nearest ``(iy, iz)`` voxel of each valid sample, -1 elsewhere.
    column_of_voxel : (Ny, Nz) int
        Ray column ``j`` owning each voxel.
    """

    values: np.ndarray
    step: float
    ranges: np.ndarray
    elevations: np.ndarray
    valid: np.ndarray
    voxel_of_sample: np.ndarray
    column_of_voxel: np.ndarray
    grid: GroundGrid = field(repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def back_project(self) -> np.ndarray:
        """Scatter ray-sample mass onto the nearest voxels.

        Returns a ground-grid array of mass (value * sample area * dx).
        """
        grid = self.grid
        out = np.zeros(grid.shape)
        jj, kk = np.nonzero(self.valid)
        iy = self.voxel_of_sample[jj, kk, 0]
        iz = self.voxel_of_sample[jj, kk, 1]
        area = self.step ** 2 * grid.spacing[0]
        for ix in range(grid.shape[0]):
            np.add.at(out[ix], (iy, iz), self.values[ix, jj, kk] * area)
        return out


def resample_to_rays(magnitudes: np.ndarray, geom: AcquisitionGeometry,
                     grid: GroundGrid) -> RayVolume:
    """Resample a ground-geometry magnitude volume along sensor rays.

    Samples are spaced ``min(dy, dz)`` both along and across rays, on a
    lattice anchored at the grid origin so that axis-aligned geometries
    land on voxel centers. Values come from trilinear interpolation.
    """
    vol = np.asarray(magnitudes, dtype=float)
    if vol.size == 0:
        raise ValueError("empty volume")
    if vol.shape != grid.shape:
        raise ValueError(f"volume shape {vol.shape} does not match grid {grid.shape}")
    s, c = _trig(geom.incidence)
    _, ny, nz = grid.shape
    _, dy, dz = grid.spacing
    _, y0, z0 = grid.origin
    step = min(dy, dz)

    # cell box corners in (rho', h) with rho' = rho - r0
    ylo, yhi = y0 - dy / 2, y0 + (ny - 0.5) * dy
    zlo, zhi = z0 - dz / 2, z0 + (nz - 0.5) * dz
    cy = np.array([ylo, ylo, yhi, yhi])
    cz = np.array([zlo, zhi, zlo, zhi])
    rho_c = cy * s - cz * c
    h_c = cy * c + cz * s
    rho_a = y0 * s - z0 * c
    h_a = y0 * c + z0 * s
    k0 = math.ceil((rho_c.min() - rho_a) / step - _BOUNDARY_EPS)
    k1 = math.floor((rho_c.max() - rho_a) / step + _BOUNDARY_EPS)
    j0 = math.ceil((h_c.min() - h_a) / step - _BOUNDARY_EPS)
    j1 = math.floor((h_c.max() - h_a) / step + _BOUNDARY_EPS)
    rho = rho_a + step * np.arange(k0, k1 + 1)
    h = h_a + step * np.arange(j0, j1 + 1)

    H, R = np.meshgrid(h, rho, indexing="ij")
    ys = R * s + H * c
    zs = -R * c + H * s
    fy = (ys - y0) / dy
    fz = (zs - z0) / dz
    tol = 1e-9
    valid = ((fy >= -0.5 - tol) & (fy <= ny - 0.5 + tol)
             & (fz >= -0.5 - tol) & (fz <= nz - 0.5 + tol))
    # snap near-integer coordinates so axis-aligned cases are exact
    fy = np.where(np.abs(fy - np.rint(fy)) < tol, np.rint(fy), fy)
    fz = np.where(np.abs(fz - np.rint(fz)) < tol, np.rint(fz), fz)

    vos = np.full(H.shape + (2,), -1, dtype=np.int64)
    vos[valid, 0] = np.clip(np.rint(fy[valid]), 0, ny - 1)
    vos[valid, 1] = np.clip(np.rint(fz[valid]), 0, nz - 1)

    values = np.zeros((grid.shape[0],) + H.shape)
    jj, kk = np.nonzero(valid)
    if jj.size:
        coords = np.stack([fy[jj, kk], fz[jj, kk]])
        for ix in range(grid.shape[0]):
            values[ix, jj, kk] = ndimage.map_coordinates(
                vol[ix], coords, order=1, mode="nearest")

    Yv, Zv = np.meshgrid(grid.y, grid.z, indexing="ij")
    hv = Yv * c + Zv * s
    col = np.rint((hv - h_a) / step).astype(np.int64) - j0
    return RayVolume(values=values, step=step, ranges=geom.reference_range + rho,
                     elevations=h, valid=valid, voxel_of_sample=vos,
                     column_of_voxel=col, grid=grid)
