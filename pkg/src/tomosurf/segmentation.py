"""Urban surface segmentation as a minimum cut.

Along every sensor ray the reflectivity is split into the mass before a
candidate surface point (``C-``) and the mass after it (``C+``). Surfaces
are charged for sitting away from the balance point of each ray, and for
their vertical wall area. A layer-cake graph turns the search for the
best elevation map into one max-flow computation:

* one node per voxel; source side = at/below the surface ("interior"),
  sink side = above it ("air", the radar side);
* ``s -> i`` with the air cost of voxel ``i`` and ``i -> t`` with its
  interior cost, so the severed terminal arcs add up to the ray penalties;
* ``beta`` arcs both ways between x- and y-neighbours at equal height;
* infinite arcs from each voxel to the one below it, plus an infinite
  arc from the source to the bottom layer, so only elevation maps have a
  finite cut.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import ReflectivityVolume
from .geometry import AcquisitionGeometry, GroundGrid, RayVolume, resample_to_rays
from .maxflow import INF, CutResult, FlowNetwork, max_flow
from .surface import ElevationMap, fill_shadow, geometric_shadow


@dataclass(frozen=True)
class CumulativeProfiles:
    """Cumulative ray masses.

    ``before[..., r]`` is the mass of samples ``0..r`` (the sample itself
    included), ``after[..., r]`` the mass of samples beyond ``r``.
    ``equilibrium`` is the first sample where ``before >= after``.
    """

    before: np.ndarray
    after: np.ndarray
    equilibrium: np.ndarray
    step: float

    @property
    def air_cost(self) -> np.ndarray:
        """Per-sample cost of leaving the sample on the radar side."""
        return np.maximum(self.before - self.after, 0.0) * self.step

    @property
    def interior_cost(self) -> np.ndarray:
        """Per-sample cost of putting the sample behind the surface."""
        return np.maximum(self.after - self.before, 0.0) * self.step


def cumulative_profiles(rays, step: float | None = None) -> CumulativeProfiles:
    """Prefix/suffix masses along the last axis.

    ``rays`` is a :class:`RayVolume` or a plain array of samples, in which
    case ``step`` (default 1) gives the sample spacing.
    """
    if isinstance(rays, RayVolume):
        vals, step = np.asarray(rays.values, dtype=float), rays.step
    else:
        vals = np.asarray(rays, dtype=float)
        step = 1.0 if step is None else float(step)
    if vals.shape[-1] == 0:
        raise ValueError("empty ray")
    if np.any(vals < 0):
        raise ValueError("ray samples must be nonnegative")
    mass = vals * step
    before = np.cumsum(mass, axis=-1)
    total = before[..., -1:]
    after = np.maximum(total - before, 0.0)
    # exact zero at the far end of the ray
    after[..., -1] = 0.0
    equi = np.argmax(before >= after, axis=-1)
    return CumulativeProfiles(before, after, equi, step)


def penalty_curve(profiles: CumulativeProfiles) -> np.ndarray:
    """``D(r)`` for every ray column and every sample index ``r``."""
    a = profiles.air_cost
    b = profiles.interior_cost
    # sum_{s<r} a_s + sum_{s>=r} b_s
    ca = np.concatenate([np.zeros(a.shape[:-1] + (1,)), np.cumsum(a, axis=-1)[..., :-1]], axis=-1)
    cb = np.cumsum(b[..., ::-1], axis=-1)[..., ::-1]
    return ca + cb


def data_penalty(profiles: CumulativeProfiles, column, r: int) -> float:
    """Penalty of a surface crossing ray ``column`` at sample ``r``.

    ``column`` indexes the leading axes, e.g. ``(ix, j)`` for a ray volume
    or ``()`` for a single profile.
    """
    n = profiles.before.shape[-1]
    if not 0 <= r < n:
        raise IndexError(f"sample index {r} outside [0, {n})")
    a = profiles.air_cost[tuple(column)]
    b = profiles.interior_cost[tuple(column)]
    return float(a[:r].sum() + b[r:].sum())


def voxel_capacities(rays: RayVolume, profiles: CumulativeProfiles):
    """Terminal capacities per voxel, summed over the samples mapped to it.

    Returns ``(to_source, to_sink)`` arrays of the grid's shape: the
    capacities of ``s -> i`` (air cost) and ``i -> t`` (interior cost).
    """
    grid = rays.grid
    cap_s = np.zeros(grid.shape)
    cap_t = np.zeros(grid.shape)
    jj, kk = np.nonzero(rays.valid)
    iy = rays.voxel_of_sample[jj, kk, 0]
    iz = rays.voxel_of_sample[jj, kk, 1]
    a = profiles.air_cost
    b = profiles.interior_cost
    for ix in range(grid.shape[0]):
        np.add.at(cap_s[ix], (iy, iz), a[ix, jj, kk])
        np.add.at(cap_t[ix], (iy, iz), b[ix, jj, kk])
    return cap_s, cap_t


def _grid_network(cap_s: np.ndarray, cap_t: np.ndarray, beta: float) -> FlowNetwork:
    shape = cap_s.shape
    nv = cap_s.size
    s, t = nv, nv + 1
    net = FlowNetwork(nv + 2, source=s, sink=t)
    idx = np.arange(nv).reshape(shape)
    flat = idx.ravel()
    nz_s = cap_s.ravel() > 0
    nz_t = cap_t.ravel() > 0
    net.add_arcs(np.full(nz_s.sum(), s), flat[nz_s], cap_s.ravel()[nz_s])
    net.add_arcs(flat[nz_t], np.full(nz_t.sum(), t), cap_t.ravel()[nz_t])
    if beta > 0:
        net.add_arcs(idx[:-1].ravel(), idx[1:].ravel(), beta, beta)
        net.add_arcs(idx[:, :-1].ravel(), idx[:, 1:].ravel(), beta, beta)
    # upper voxel -> lower voxel: severed only if the column is not a layer cake
    net.add_arcs(idx[:, :, 1:].ravel(), idx[:, :, :-1].ravel(), INF, 0.0)
    bottom = idx[:, :, 0].ravel()
    net.add_arcs(np.full(bottom.size, s), bottom, INF, 0.0)
    return net


def build_graph(magnitudes: np.ndarray, geom: AcquisitionGeometry, grid: GroundGrid,
                beta: float) -> FlowNetwork:
    """Flow network whose cuts price elevation maps by :func:`surface_energy`.

    Voxel ``(ix, iy, iz)`` is node ``(ix * Ny + iy) * Nz + iz``; the source
    and sink are the last two nodes.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    rays = resample_to_rays(magnitudes, geom, grid)
    cap_s, cap_t = voxel_capacities(rays, cumulative_profiles(rays))
    return _grid_network(cap_s, cap_t, beta)


def extract_surface(cut: CutResult, grid: GroundGrid) -> ElevationMap:
    """Elevation map from a cut of :func:`build_graph`'s network."""
    interior = np.asarray(cut.source_side[: grid.size]).reshape(grid.shape)
    count = interior.sum(axis=-1)
    k = np.arange(grid.shape[2])
    if np.any(count < 1) or np.any(interior != (k[None, None, :] < count[..., None])):
        raise RuntimeError("cut does not describe an elevation map")
    return ElevationMap.from_levels(count - 1, grid)


def _smoothness(levels: np.ndarray) -> float:
    return float(np.abs(np.diff(levels, axis=0)).sum() + np.abs(np.diff(levels, axis=1)).sum())


def surface_energy(emap: ElevationMap, magnitudes: np.ndarray, geom: AcquisitionGeometry,
                   grid: GroundGrid, beta: float, rays: RayVolume | None = None) -> float:
    """Discrete surface energy: ray penalties plus ``beta`` times wall area.

    Each ray sample is labelled by the voxel it maps to. A ray that crosses
    the surface once at sample ``r`` contributes exactly
    ``data_penalty(r)``; rays re-emerging behind an occluder are charged
    per sample with the same costs. Wall area is counted in voxel faces,
    ``sum |E_i - E_j| / dz`` over horizontal neighbours.
    """
    if rays is None:
        rays = resample_to_rays(magnitudes, geom, grid)
    prof = cumulative_profiles(rays)
    levels = emap.levels
    jj, kk = np.nonzero(rays.valid)
    iy = rays.voxel_of_sample[jj, kk, 0]
    iz = rays.voxel_of_sample[jj, kk, 1]
    inside = iz[None, :] <= levels[:, iy]
    a = prof.air_cost[:, jj, kk]
    b = prof.interior_cost[:, jj, kk]
    data = float(np.where(inside, b, a).sum())
    return data + beta * _smoothness(levels)


def segment_surface(magnitudes: np.ndarray, geom: AcquisitionGeometry, grid: GroundGrid,
                    beta: float, return_cut: bool = False):
    """Globally optimal elevation map of a magnitude volume.

    Among equal-energy optima the lowest surface is returned (the source
    side of the cut is the set reachable from the source).
    """
    net = build_graph(magnitudes, geom, grid, beta)
    cut = max_flow(net)
    emap = extract_surface(cut, grid)
    if return_cut:
        return emap, cut
    return emap


def shadow_mask(emap: ElevationMap, geom: AcquisitionGeometry,
                magnitudes: np.ndarray | None = None, threshold: float = 0.95) -> np.ndarray:
    """Columns hidden from the sensor by a nearer part of the surface.

    Geometric occlusion is necessary. When ``magnitudes`` is given, an
    occluded column is only flagged if at least ``threshold`` of the mass on
    its surface ray lies at or before the point where the ray enters the
    occluder (or if the ray carries no mass at all).
    """
    occluded = geometric_shadow(emap, geom)
    if magnitudes is None or threshold <= 0 or not occluded.any():
        return occluded
    grid = emap.grid
    rays = resample_to_rays(magnitudes, geom, grid)
    prof = cumulative_profiles(rays)
    levels = emap.levels
    total = prof.before[..., -1]
    # per ray column: first sample inside the interior of some column
    vos = rays.voxel_of_sample
    valid = rays.valid
    out = occluded.copy()
    for ix, iy in zip(*np.nonzero(occluded)):
        j = rays.column_of_voxel[iy, levels[ix, iy]]
        if not 0 <= j < valid.shape[0]:
            continue
        ks = np.flatnonzero(valid[j])
        sy, sz = vos[j, ks, 0], vos[j, ks, 1]
        hit = ks[(sy < iy) & (sz <= levels[ix, sy])]
        if total[ix, j] <= 0 or hit.size == 0:
            continue
        frac = prof.before[ix, j, hit[0]] / total[ix, j]
        out[ix, iy] = frac >= threshold
    return out


def remove_shadows(emap: ElevationMap, geom: AcquisitionGeometry,
                   magnitudes: np.ndarray | None = None, threshold: float = 0.95) -> ElevationMap:
    """Flag shadowed columns invalid and fill them from the far side."""
    shadow = shadow_mask(emap, geom, magnitudes, threshold)
    filled = fill_shadow(emap.heights, shadow)
    return ElevationMap(filled, emap.grid, valid=~shadow)


def segment_volume(volume: ReflectivityVolume, geom: AcquisitionGeometry, beta: float) -> ElevationMap:
    return segment_surface(volume.magnitude, geom, volume.grid, beta)
