"""l1-regularized tomographic inversion.

Solves ``min_u ||Phi u - v||^2 + sum_p mu(p) |u(p)|`` by proximal gradient
descent (optionally accelerated). With the squared data term as written,
the gradient is ``2 Phi^H (Phi u - v)`` and a voxel stays at zero as long as
``|2 Phi^H v| <= mu`` there.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .forward import ReflectivityVolume, SARStack, tomo_operator
from .geometry import AcquisitionGeometry, GroundGrid, RadarGrid, steering_vector


class DivergenceError(ArithmeticError):
    """Raised when the objective blows up (step-size fault)."""


@dataclass(frozen=True)
class SolverParams:
    max_iterations: int = 1000
    tolerance: float = 1e-6
    accelerated: bool = True
    safety: float = 0.95
    # stop only once the KKT residual is below this fraction of mean(mu);
    # None keeps the objective test alone
    kkt_tolerance: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.kkt_tolerance is not None and not self.kkt_tolerance > 0:
            raise ValueError("kkt_tolerance must be positive")


def soft_threshold(x, t):
    """Complex soft-thresholding ``x * max(1 - t/|x|, 0)``."""
    x = np.asarray(x)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("threshold must be nonnegative")
    mag = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > t, 1.0 - t / np.where(mag > 0, mag, 1.0), 0.0)
    return x * scale


def _check_mu(mu, shape) -> np.ndarray:
    mu = np.broadcast_to(np.asarray(mu, dtype=float), shape)
    if np.any(~np.isfinite(mu)) or np.any(mu < 0):
        raise ValueError("sparsity map must be finite and nonnegative")
    return mu


def _power_iteration(normal, shape, iters: int, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = normal(x)
        lam = float(np.vdot(x, y).real)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
    return lam


@functools.lru_cache(maxsize=8)
def operator_norm_sq(geom: AcquisitionGeometry, rgrid: RadarGrid, grid: GroundGrid,
                     iters: int = 100) -> float:
    """Power-iteration estimate of ``||Phi||^2`` (cached per geometry)."""
    if iters < 10:
        raise ValueError("use at least 10 power iterations")
    op = tomo_operator(geom, rgrid, grid)
    if op.inside.size == 0:
        return 0.0
    return _power_iteration(lambda x: op.adjoint(op.forward(x)), grid.shape, iters)


def _proximal_gradient(forward, adjoint, v, mu, lipschitz, params: SolverParams,
                       x0=None, shape=None):
    """Shared FISTA/ISTA loop. Returns ``(x, objective_history)``."""
    if x0 is None:
        x = np.zeros(shape, dtype=complex)
    else:
        x = np.array(x0, dtype=complex)
    if lipschitz <= 0:
        return x, [float(np.vdot(v, v).real)]
    step = params.safety / lipschitz
    thresh = step * mu
    Ax = forward(x)

    def objective(Ax_, x_):
        r = Ax_ - v
        return float(np.vdot(r, r).real + np.sum(mu * np.abs(x_)))

    def certified(x_, Ax_):
        if params.kkt_tolerance is None:
            return True
        g = 2.0 * adjoint(Ax_ - v)
        return _kkt(x_, g, mu) <= params.kkt_tolerance * max(float(np.mean(mu)), 1e-300)

    f = objective(Ax, x)
    history = [f]
    f0 = max(f, 1e-300)
    y, Ay = x, Ax
    t = 1.0
    for _ in range(params.max_iterations):
        grad = 2.0 * adjoint(Ay - v)
        x_new = soft_threshold(y - step * grad, thresh)
        Ax_new = forward(x_new)
        f_new = objective(Ax_new, x_new)
        if not np.isfinite(f_new) or f_new > 10 * f0:
            raise DivergenceError(f"objective rose from {f0:.3e} to {f_new:.3e}")
        history.append(f_new)
        if params.accelerated:
            if f_new > f:
                # function-value restart
                t = 1.0
                y, Ay = x_new, Ax_new
            else:
                t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                m = (t - 1.0) / t_new
                y = x_new + m * (x_new - x)
                Ay = Ax_new + m * (Ax_new - Ax)
                t = t_new
        else:
            y, Ay = x_new, Ax_new
        done = (abs(f - f_new) <= params.tolerance * max(abs(f_new), 1e-300)
                and certified(x_new, Ax_new))
        x, Ax, f = x_new, Ax_new, f_new
        if done:
            break
    return x, history


def invert_l1_3d(stack: SARStack, geom: AcquisitionGeometry, rgrid: RadarGrid,
                 grid: GroundGrid, mu, params: SolverParams = SolverParams(),
                 x0=None, return_info: bool = False):
    """Sparse inversion of the whole stack directly in ground geometry.

    ``mu`` is a scalar or a per-voxel map broadcastable to ``grid.shape``.
    With ``return_info`` the result is ``(volume, info)`` where ``info``
    holds the objective history, iteration count and KKT residual.
    """
    mu = _check_mu(mu, grid.shape)
    op = tomo_operator(geom, rgrid, grid)
    lip = 2.0 * operator_norm_sq(geom, rgrid, grid)
    x, hist = _proximal_gradient(op.forward, op.adjoint, stack.data, mu, lip, params,
                                 x0=x0, shape=grid.shape)
    vol = ReflectivityVolume(x, grid)
    if not return_info:
        return vol
    info = {"objective": hist, "iterations": len(hist) - 1,
            "kkt": kkt_residual(vol, stack, geom, rgrid, grid, mu)}
    return vol, info


def kkt_residual(u: ReflectivityVolume, stack: SARStack, geom: AcquisitionGeometry,
                 rgrid: RadarGrid, grid: GroundGrid, mu) -> float:
    """Largest violation of the LASSO optimality conditions.

    Off the support ``|g| <= mu`` must hold, on the support
    ``g + mu u/|u| = 0``, with ``g = 2 Phi^H (Phi u - v)``.
    """
    mu = _check_mu(mu, grid.shape)
    op = tomo_operator(geom, rgrid, grid)
    g = 2.0 * op.adjoint(op.forward(u.values) - stack.data)
    return _kkt(u.values, g, mu)


def _kkt(x, g, mu) -> float:
    mag = np.abs(x)
    on = mag > 0
    off_viol = np.maximum(np.abs(g) - mu, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        on_viol = np.abs(g + mu * x / np.where(on, mag, 1.0))
    viol = np.where(on, on_viol, off_viol)
    return float(viol.max(initial=0.0))


def invert_cs_per_cell(stack: SARStack, geom: AcquisitionGeometry, rgrid: RadarGrid,
                       z_samples, mu: float, params: SolverParams = SolverParams(),
                       return_info: bool = False):
    """Per-pixel compressed-sensing inversion on a common height grid.

    Every radar pixel is solved with the steering matrix ``A(z_samples)``;
    all pixels are iterated jointly. Returns complex profiles of shape
    ``(Naz, Nr, len(z_samples))``; use
    :func:`tomosurf.estimators.profiles_to_ground` to map them to voxels.
    """
    z_samples = np.asarray(z_samples, dtype=float)
    mu = float(mu)
    if mu < 0 or not np.isfinite(mu):
        raise ValueError("mu must be finite and nonnegative")
    A = steering_vector(geom, z_samples)
    AH = np.conj(A.T)
    n = geom.num_images
    V = stack.data.reshape(n, -1)

    def forward(X):
        return A @ X

    def adjoint(R):
        return AH @ R

    lip = 2.0 * float(np.linalg.norm(A, 2) ** 2)
    shape = (z_samples.size, V.shape[1])
    X, hist = _proximal_gradient(forward, adjoint, V, mu, lip, params, shape=shape)
    profiles = X.T.reshape(rgrid.shape + (z_samples.size,))
    if not return_info:
        return profiles
    g = 2.0 * adjoint(forward(X) - V)
    info = {"objective": hist, "iterations": len(hist) - 1,
            "kkt": _kkt(X, g, np.full(X.shape, mu))}
    return profiles, info
