# REDRESS on a small scene: every round sharpens the sparsity map around
# the last surface, and scatterers far from it die out.
import numpy as np

from tomosurf import (AcquisitionGeometry, Box, GroundGrid, RedressParams, SceneSpec,
                      SolverParams, make_scene, mean_error, radar_grid_covering, redress,
                      simulate_stack)
from tomosurf.forward import sigma_for_snr, tomo_operator
from tomosurf.redress import off_surface_support
from tomosurf.surface import geometric_shadow

geom = AcquisitionGeometry(tuple(np.linspace(-400, 400, 8)), 0.031, 0.6, 6e5)
grid = GroundGrid((24, 24, 14))
rgrid = radar_grid_covering(geom, grid)
scene, truth = make_scene(SceneSpec(boxes=(Box(5, 17, 6, 16, 10),), density=0.6, seed=2),
                          grid, geom)
clean = simulate_stack(scene, geom, rgrid, 0.0, 0)
stack = simulate_stack(scene, geom, rgrid, sigma_for_snr(clean, 10.0), 0)

# scale mu to the data: above 2 |Phi^H v|_inf the solution is all zeros
op = tomo_operator(geom, rgrid, grid)
mu_max = 2 * np.abs(op.adjoint(stack.data)).max()
print("mu_max: %.3f" % mu_max)

params = RedressParams(n=5, mu0=0.1 * mu_max, b=0.1 * mu_max, beta=0.5,
                       solver=SolverParams(200, 1e-6))
u, emap, history = redress(stack, geom, rgrid, grid, params, return_history=True)

shadow = geometric_shadow(truth, geom)
print("round  error(m)  support  off-surface  max mu")
for rec in history:
    print("%5d  %8.3f  %7d  %11d  %6.2f" % (
        rec.k, mean_error(rec.surface, truth, exclude=shadow),
        np.count_nonzero(rec.volume.values),
        off_surface_support(rec.volume, rec.surface, radius=1.0), rec.mu.max()))
