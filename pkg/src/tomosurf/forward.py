"""Synthetic urban scenes and the tomographic forward operator."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .geometry import (AcquisitionGeometry, GroundGrid, RadarGrid, cell_indices)
from .surface import ElevationMap, visible_voxels


@dataclass(frozen=True)
class ReflectivityVolume:
    """Complex (or magnitude) reflectivity sampled on a ground grid."""

    values: np.ndarray
    grid: GroundGrid

    def __post_init__(self):
        if np.shape(self.values) != self.grid.shape:
            raise ValueError(f"values shape {np.shape(self.values)} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("reflectivity must be finite")

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class SARStack:
    """N co-registered complex images, shape (N, azimuth, range)."""

    data: np.ndarray
    rgrid: RadarGrid

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[1:] != self.rgrid.shape:
            raise ValueError(f"stack shape {self.data.shape} does not match radar grid {self.rgrid.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("stack values must be finite")

    @property
    def num_images(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Box:
    """Building footprint ``[x0, x1) x [y0, y1)`` in meters with a height."""

    x0: float
    x1: float
    y0: float
    y1: float
    height: float


@dataclass(frozen=True)
class SceneSpec:
    boxes: tuple[Box, ...] = ()
    ground_power: float = 1.0
    facade_power: float = 4.0
    roof_power: float = 1.0
    density: float = math.inf
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(
            b if isinstance(b, Box) else Box(**b) for b in self.boxes))
        for b in self.boxes:
            if b.height < 0:
                raise ValueError("box heights must be >= 0")
            if not (b.x1 > b.x0 and b.y1 > b.y0):
                raise ValueError(f"degenerate footprint {b}")
        if min(self.ground_power, self.facade_power, self.roof_power) < 0:
            raise ValueError("amplitudes must be >= 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.density < 0:
            raise ValueError("density must be >= 0")


def scene_truth(spec: SceneSpec, grid: GroundGrid) -> ElevationMap:
    """Upper envelope of the boxes over a flat ground at the grid bottom."""
    x, y = grid.x, grid.y
    dx, dy, _ = grid.spacing
    xlo, xhi = x[0] - dx / 2, x[-1] + dx / 2
    ylo, yhi = y[0] - dy / 2, y[-1] + dy / 2
    top = grid.z_top - grid.origin[2]
    rel = np.zeros(grid.shape[:2])
    for b in spec.boxes:
        if b.x0 < xlo - 1e-9 or b.x1 > xhi + 1e-9 or b.y0 < ylo - 1e-9 or b.y1 > yhi + 1e-9:
            raise ValueError(f"footprint {b} outside the grid")
        if b.height > top + 1e-9:
            raise ValueError(f"box height {b.height} exceeds the grid top")
        inside = ((x[:, None] >= b.x0) & (x[:, None] < b.x1)
                  & (y[None, :] >= b.y0) & (y[None, :] < b.y1))
        rel = np.where(inside, np.maximum(rel, b.height), rel)
    return ElevationMap(grid.origin[2] + rel, grid)


def surface_voxels(emap: ElevationMap) -> np.ndarray:
    """Face type of each voxel: 0 none, 1 ground, 2 facade, 3 roof.

    Tops of columns are ground (at level 0) or roof; walls are only placed
    on the sensor-facing side, i.e. where the -y neighbour is lower.
    """
    lv = emap.levels
    nz = emap.grid.shape[2]
    k = np.arange(nz)[None, None, :]
    kind = np.zeros(emap.grid.shape, dtype=np.int8)
    prev = np.zeros_like(lv)
    prev[:, 1:] = lv[:, :-1]
    prev[:, 0] = lv[:, 0]
    wall = (k > prev[:, :, None]) & (k < lv[:, :, None])
    kind[wall] = 2
    top = k == lv[:, :, None]
    kind[top & (lv[:, :, None] == 0)] = 1
    kind[top & (lv[:, :, None] > 0)] = 3
    return kind


def make_scene(spec: SceneSpec, grid: GroundGrid,
               geom: AcquisitionGeometry | None = None):
    """Build a synthetic scene and its ground-truth elevation map.

    Visible surface voxels carry a scatterer with probability
    ``min(1, density * dx)`` and random phase. If ``geom`` is given, voxels
    hidden from the sensor by nearer structures get zero reflectivity.

    Returns
    -------
    (ReflectivityVolume, ElevationMap)
    """
    truth = scene_truth(spec, grid)
    kind = surface_voxels(truth)
    if geom is not None:
        kind = np.where(visible_voxels(truth, geom), kind, 0)
    amp = np.sqrt(np.array([0.0, spec.ground_power, spec.facade_power, spec.roof_power]))
    rng = np.random.default_rng(spec.seed)
    phase = rng.uniform(0.0, 2 * np.pi, size=grid.shape)
    p = min(1.0, spec.density * grid.spacing[0])
    keep = rng.random(grid.shape) < p
    values = amp[kind] * keep * np.exp(1j * phase)
    return ReflectivityVolume(values, grid), truth


class TomoOperator:
    """Matrix-free form of the ground-to-stack operator.

    ``forward`` sums, per radar cell and image, the voxel reflectivities
    weighted by the steering phase ``exp(-j xi_n z)``.
    """

    def __init__(self, geom: AcquisitionGeometry, rgrid: RadarGrid, grid: GroundGrid):
        self.geom, self.rgrid, self.grid = geom, rgrid, grid
        cells = cell_indices(geom, rgrid, grid).ravel()
        self.cells = cells
        self.inside = np.flatnonzero(cells >= 0)
        ncell = rgrid.azimuth_count * rgrid.range_count
        ones = np.ones(self.inside.size)
        # (cells x voxels) incidence matrix
        self.incidence = sparse.csr_matrix(
            (ones, (cells[self.inside], self.inside)), shape=(ncell, grid.size))
        self.incidence_t = self.incidence.T.tocsr()
        _, _, Z = grid.mesh()
        self.phase = np.exp(-1j * np.multiply.outer(geom.xi, Z.ravel()))
        self.phase_t = np.ascontiguousarray(self.phase.T)
        self.cell_counts = np.bincount(cells[self.inside], minlength=ncell)

    @property
    def num_images(self) -> int:
        return self.geom.num_images

    def forward(self, u: np.ndarray) -> np.ndarray:
        """Ground volume (grid.shape) -> stack array (N, Naz, Nr)."""
        w = self.phase_t * np.ravel(u)[:, None]
        v = self.incidence @ w
        return v.T.reshape((self.num_images,) + self.rgrid.shape)

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        """Stack array (N, Naz, Nr) -> ground volume (grid.shape)."""
        vt = np.reshape(v, (self.num_images, -1)).T
        g = self.incidence_t @ vt
        return np.einsum("vn,vn->v", np.conj(self.phase_t), g).reshape(self.grid.shape)

    def gram_diagonal(self) -> np.ndarray:
        """Squared column norms of the operator (N inside the swath, else 0)."""
        d = np.zeros(self.grid.size)
        d[self.inside] = self.num_images
        return d.reshape(self.grid.shape)


@functools.lru_cache(maxsize=8)
def tomo_operator(geom: AcquisitionGeometry, rgrid: RadarGrid, grid: GroundGrid) -> TomoOperator:
    return TomoOperator(geom, rgrid, grid)


def apply_phi(u: ReflectivityVolume, geom: AcquisitionGeometry, rgrid: RadarGrid) -> SARStack:
    op = tomo_operator(geom, rgrid, u.grid)
    return SARStack(op.forward(u.values), rgrid)


def adjoint_phi(v: SARStack, geom: AcquisitionGeometry, rgrid: RadarGrid,
                grid: GroundGrid) -> ReflectivityVolume:
    op = tomo_operator(geom, rgrid, grid)
    return ReflectivityVolume(op.adjoint(v.data), grid)


def simulate_stack(scene: ReflectivityVolume, geom: AcquisitionGeometry,
                   rgrid: RadarGrid, sigma: float, seed: int) -> SARStack:
    """Noisy stack ``Phi u + eps``.

    ``eps`` is circular complex Gaussian with standard deviation ``sigma`` on
    both the real and imaginary parts. Image ``n`` draws from its own
    generator seeded with ``(seed, n)``.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    clean = apply_phi(scene, geom, rgrid).data
    if sigma == 0:
        return SARStack(clean, rgrid)
    noisy = np.empty_like(clean)
    for n in range(clean.shape[0]):
        rng = np.random.default_rng([seed, n])
        eps = rng.normal(0.0, sigma, size=(2,) + clean.shape[1:])
        noisy[n] = clean[n] + eps[0] + 1j * eps[1]
    return SARStack(noisy, rgrid)


def sigma_for_snr(stack: SARStack, snr_db: float) -> float:
    """Noise std per component giving the requested mean stack SNR."""
    power = float(np.mean(np.abs(stack.data) ** 2))
    return math.sqrt(power / (2 * 10 ** (snr_db / 10)))
