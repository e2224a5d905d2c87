"""REDRESS: alternate l1 inversion and surface segmentation.

Each round inverts the stack with a sparsity map that grows with the
distance to the previous surface, then re-segments the new volume. Far
from the surface the penalty rises quickly over the rounds, pushing
spurious scatterers (side lobes, noise) to zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .forward import ReflectivityVolume, SARStack
from .geometry import AcquisitionGeometry, GroundGrid, RadarGrid
from .io import write_iteration, write_redress_manifest
from .segmentation import segment_surface, surface_energy
from .sparse import SolverParams, invert_l1_3d
from .surface import ElevationMap


@dataclass(frozen=True)
class RedressParams:
    n: int = 5
    mu0: float = 1.0
    b: float = 1.0
    beta: float = 2.0
    solver: SolverParams = field(default_factory=SolverParams)
    warm_start: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("REDRESS needs at least two iterations")
        if not (self.mu0 >= 0 and np.isfinite(self.mu0)):
            raise ValueError("mu0 must be finite and >= 0")
        if not (self.b >= 0 and np.isfinite(self.b)):
            raise ValueError("b must be finite and >= 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    surface: ElevationMap
    volume: ReflectivityVolume
    mu: np.ndarray
    objective: float
    energy: float
    kkt: float
    iterations: int


def surface_voxel_mask(emap: ElevationMap) -> np.ndarray:
    """Interior voxels on the boundary of the layer cake.

    These are the column tops plus the wall voxels: interior voxels with an
    air voxel directly above or next to them in x or y.
    """
    inside = emap.interior()
    air = ~inside
    touch = np.zeros_like(inside)
    touch[:, :, :-1] |= air[:, :, 1:]
    touch[1:] |= air[:-1]
    touch[:-1] |= air[1:]
    touch[:, 1:] |= air[:, :-1]
    touch[:, :-1] |= air[:, 1:]
    k = np.arange(inside.shape[2])
    top = k[None, None, :] == emap.levels[:, :, None]
    return inside & (touch | top)


def distance_to_surface(emap: ElevationMap) -> np.ndarray:
    """Euclidean distance (in voxels) from each voxel to the nearest surface voxel."""
    return ndimage.distance_transform_edt(~surface_voxel_mask(emap))


def mu_map(emap: ElevationMap, k: int, params: RedressParams,
           distance: np.ndarray | None = None) -> np.ndarray:
    """Sparsity map of round ``k``: ``mu0 + b/(n-1)^2 * (k/(n-k) * d)^2``."""
    n = params.n
    if not 0 <= k < n:
        raise ValueError(f"iteration index {k} outside [0, {n})")
    if k == 0 or params.b == 0:
        return np.full(emap.grid.shape, float(params.mu0))
    d = distance_to_surface(emap) if distance is None else distance
    return params.mu0 + params.b / (n - 1) ** 2 * (k / (n - k) * d) ** 2


def redress(stack: SARStack, geom: AcquisitionGeometry, rgrid: RadarGrid, grid: GroundGrid,
            params: RedressParams, checkpoint_dir=None, return_history: bool = False):
    """Run ``params.n`` rounds of inversion + segmentation.

    Round 0 uses the uniform map ``mu0``. Returns the final
    ``(volume, surface)``, plus the list of :class:`IterationRecord` when
    ``return_history`` is set. With ``checkpoint_dir`` every round is saved
    under ``iter_k/`` and a manifest is written at the end.
    """
    history: list[IterationRecord] = []
    emap = None
    u = None
    for k in range(params.n):
        mu = np.full(grid.shape, float(params.mu0)) if emap is None else mu_map(emap, k, params)
        x0 = u.values if (params.warm_start and u is not None) else None
        u, info = invert_l1_3d(stack, geom, rgrid, grid, mu, params.solver, x0=x0,
                               return_info=True)
        emap = segment_surface(u.magnitude, geom, grid, params.beta)
        energy = surface_energy(emap, u.magnitude, geom, grid, params.beta)
        rec = IterationRecord(k, emap, u, mu, info["objective"][-1], energy,
                              info["kkt"], info["iterations"])
        history.append(rec)
        if checkpoint_dir is not None:
            write_iteration(Path(checkpoint_dir), rec)
    if checkpoint_dir is not None:
        write_redress_manifest(Path(checkpoint_dir), params, history)
    if return_history:
        return u, emap, history
    return u, emap


def off_surface_support(volume: ReflectivityVolume, emap: ElevationMap, radius: float = 0.0) -> int:
    """Number of nonzero voxels farther than ``radius`` voxels from the surface."""
    d = distance_to_surface(emap)
    return int(np.count_nonzero((np.abs(volume.values) > 0) & (d > radius)))
