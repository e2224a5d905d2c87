"""Elevation maps and geometric shadowing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import AcquisitionGeometry, GroundGrid, _trig


@dataclass(frozen=True)
class ElevationMap:
    """Height field ``z = E(x, y)`` over the horizontal part of a grid.

    ``valid`` marks columns that were observed; shadowed columns carry a
    filled height but ``valid == False``.
    """

    heights: np.ndarray
    grid: GroundGrid
    valid: np.ndarray | None = None

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float)
        if h.shape != self.grid.shape[:2]:
            raise ValueError(f"heights shape {h.shape} does not match grid {self.grid.shape[:2]}")
        object.__setattr__(self, "heights", h)
        if self.valid is not None:
            v = np.asarray(self.valid, dtype=bool)
            if v.shape != h.shape:
                raise ValueError("valid mask shape mismatch")
            object.__setattr__(self, "valid", v)

    @classmethod
    def from_levels(cls, levels, grid: GroundGrid, valid=None) -> "ElevationMap":
        levels = np.asarray(levels)
        return cls(grid.origin[2] + grid.spacing[2] * levels, grid, valid)

    @property
    def levels(self) -> np.ndarray:
        """Nearest z-level index of every column, clipped to the grid."""
        z0, dz = self.grid.origin[2], self.grid.spacing[2]
        lv = np.rint((self.heights - z0) / dz).astype(np.int64)
        return np.clip(lv, 0, self.grid.shape[2] - 1)

    @property
    def mask(self) -> np.ndarray:
        if self.valid is None:
            return np.ones(self.heights.shape, dtype=bool)
        return self.valid

    def interior(self) -> np.ndarray:
        """Layer-cake labeling: True for voxels at or below the surface."""
        k = np.arange(self.grid.shape[2])
        return k[None, None, :] <= self.levels[:, :, None]


def visible_voxels(emap: ElevationMap, geom: AcquisitionGeometry) -> np.ndarray:
    """Voxels whose line of sight to the sensor is not blocked by the surface.

    A point ``(y, z)`` is hidden when a column nearer to the sensor rises
    above the ray through it, i.e. ``E(y') + y' cot(theta) > z + y cot(theta)``
    for some ``y' < y``.
    """
    s, c = _trig(geom.incidence)
    grid = emap.grid
    cot = c / s
    g = emap.heights + grid.y[None, :] * cot
    horizon = np.full_like(g, -np.inf)
    horizon[:, 1:] = np.maximum.accumulate(g, axis=1)[:, :-1]
    zray = grid.z[None, None, :] + grid.y[None, :, None] * cot
    tol = 1e-9 * max(1.0, float(np.abs(grid.z).max()))
    return zray >= horizon[:, :, None] - tol


def geometric_shadow(emap: ElevationMap, geom: AcquisitionGeometry) -> np.ndarray:
    """Columns whose surface point is hidden behind a nearer column."""
    vis = visible_voxels(emap, geom)
    lv = emap.levels
    ix, iy = np.indices(lv.shape)
    return ~vis[ix, iy, lv]


def fill_shadow(heights: np.ndarray, shadow: np.ndarray) -> np.ndarray:
    """Replace shadowed heights by the first unshadowed height further away.

    The search runs in +y (away from the sensor); rows without such a
    column fall back to the nearest unshadowed column in -y.
    """
    out = np.array(heights, dtype=float)
    nx, ny = out.shape
    for ix in range(nx):
        good = np.flatnonzero(~shadow[ix])
        if good.size == 0:
            continue
        for iy in np.flatnonzero(shadow[ix]):
            pos = np.searchsorted(good, iy)
            src = good[pos] if pos < good.size else good[-1]
            out[ix, iy] = out[ix, src]
    return out
