# Simulate a small city block, image it with beamforming and cut out
# the best elevation map for a few smoothness weights.
import numpy as np

from tomosurf import (AcquisitionGeometry, Box, GroundGrid, SceneSpec, make_scene,
                      mean_error, radar_grid_covering, segment_surface, simulate_stack,
                      spectral_volume)
from tomosurf.forward import sigma_for_snr
from tomosurf.surface import geometric_shadow

geom = AcquisitionGeometry(tuple(np.linspace(-400, 400, 8)), 0.031, 0.6, 6e5)
grid = GroundGrid((32, 32, 16))
rgrid = radar_grid_covering(geom, grid)
print("ground grid:", grid.shape, " radar grid:", rgrid.shape)

spec = SceneSpec(boxes=(Box(4, 14, 6, 16, 9), Box(18, 28, 18, 26, 13)), density=0.6, seed=1)
scene, truth = make_scene(spec, grid, geom)
print("nonzero scatterers:", np.count_nonzero(scene.values))

clean = simulate_stack(scene, geom, rgrid, 0.0, 0)
sigma = sigma_for_snr(clean, 10.0)
stack = simulate_stack(scene, geom, rgrid, sigma, 0)
print("noise sigma at 10 dB: %.3f" % sigma)

vol = spectral_volume(stack, geom, rgrid, grid, "beamforming", window_size=5)
shadow = geometric_shadow(truth, geom)
print("shadowed columns: %d of %d" % (shadow.sum(), shadow.size))

for beta in (0.25, 1.0, 4.0, 16.0):
    emap = segment_surface(vol.magnitude, geom, grid, beta)
    err = mean_error(emap, truth, exclude=shadow)
    print("beta %5.2f  mean error %.2f m  distinct heights %d"
          % (beta, err, np.unique(emap.levels).size))
