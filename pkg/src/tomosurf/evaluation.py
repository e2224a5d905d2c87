"""Surface error metrics and the smoothness-weight sweep."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import AcquisitionGeometry, GroundGrid
from .segmentation import segment_surface
from .surface import ElevationMap


def _check_same_columns(a: ElevationMap, b: ElevationMap):
    ga, gb = a.grid, b.grid
    if ga.shape[:2] != gb.shape[:2]:
        raise ValueError(f"grid mismatch: {ga.shape[:2]} vs {gb.shape[:2]}")
    if not (np.allclose(ga.spacing[:2], gb.spacing[:2]) and np.allclose(ga.origin[:2], gb.origin[:2])):
        raise ValueError("grid mismatch: horizontal spacing or origin differ")


def _keep(est: ElevationMap, exclude) -> np.ndarray:
    if exclude is None:
        return np.ones(est.heights.shape, dtype=bool)
    exclude = np.asarray(exclude, dtype=bool)
    if exclude.shape != est.heights.shape:
        raise ValueError("mask shape does not match the elevation map")
    return ~exclude


def mean_error(est: ElevationMap, truth: ElevationMap, exclude=None) -> float:
    """Mean ``|E_est - E_truth|`` over the columns not flagged in ``exclude``."""
    _check_same_columns(est, truth)
    keep = _keep(est, exclude)
    if not keep.any():
        raise ValueError("every column is masked")
    return float(np.abs(est.heights - truth.heights)[keep].mean())


@dataclass(frozen=True)
class SurfaceErrorReport:
    mean_error: float
    errors: np.ndarray
    masked_fraction: float
    masked_error: float
    params: dict = field(default_factory=dict)


def error_report(est: ElevationMap, truth: ElevationMap, exclude=None, **params) -> SurfaceErrorReport:
    """Error statistics; masked (e.g. shadow-filled) columns are reported separately."""
    me = mean_error(est, truth, exclude)
    keep = _keep(est, exclude)
    err = np.abs(est.heights - truth.heights)
    masked = float(err[~keep].mean()) if (~keep).any() else 0.0
    return SurfaceErrorReport(me, err, float((~keep).mean()), masked, dict(params))


def beta_sweep(magnitudes: np.ndarray, geom: AcquisitionGeometry, grid: GroundGrid,
               truth: ElevationMap, betas, exclude=None):
    """Segment for every ``beta`` and pick the one with the lowest error.

    Returns ``(best_beta, errors)`` with ``errors`` aligned to ``betas``;
    ties go to the smaller ``beta``.
    """
    betas = [float(b) for b in betas]
    if not betas:
        raise ValueError("beta list is empty")
    errors = []
    cache: dict[float, float] = {}
    for b in betas:
        if b not in cache:
            cache[b] = mean_error(segment_surface(magnitudes, geom, grid, b), truth, exclude)
        errors.append(cache[b])
    best = min(zip(errors, betas))[1]
    return best, errors


REPORT_FIELDS = ("estimator", "mean_error_m", "beta", "masked_fraction")


def report_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in REPORT_FIELDS})
    return buf.getvalue()


def summary_table(rows) -> str:
    """Plain-text table with one line per estimator."""
    lines = [f"{'Estimator':<14}{'Mean error (m)':>16}{'beta':>8}"]
    lines.append("-" * len(lines[0]))
    for r in rows:
        lines.append(f"{r['estimator']:<14}{r['mean_error_m']:>16.2f}{r['beta']:>8.2f}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v
