# Height profiles of one radar pixel: beamforming, Capon and MUSIC
# on two scatterers (ground + roof) that share the same cell.
import numpy as np

from tomosurf import (AcquisitionGeometry, beamforming_profile, capon_profile,
                      music_profile, steering_vector)

geom = AcquisitionGeometry(tuple(np.linspace(-400, 400, 8)), 0.031, 0.6, 6e5)
print("images:", geom.num_images)

# Rayleigh resolution in elevation: lambda r0 sin(theta) / (2 * aperture)
aperture = max(geom.baselines) - min(geom.baselines)
rayleigh = geom.wavelength * geom.reference_range * np.sin(geom.incidence) / (2 * aperture)
print("rayleigh resolution (m): %.2f" % rayleigh)

# two scatterers 2 resolution cells apart, random phases per look
rng = np.random.default_rng(0)
z_true = np.array([0.0, 2 * rayleigh])
looks = 64
A = steering_vector(geom, z_true)
amps = rng.normal(size=(2, looks)) + 1j * rng.normal(size=(2, looks))
noise = 0.1 * (rng.normal(size=(8, looks)) + 1j * rng.normal(size=(8, looks)))
X = A @ amps + noise
R = X @ X.conj().T / looks

z = np.linspace(-10, 25, 701)
profiles = {
    "beamforming": beamforming_profile(R, geom, z),
    "capon": capon_profile(R, geom, z),
    "music": music_profile(R, geom, z, order=2),
}

for name, p in profiles.items():
    p = p / p.max()
    # local maxima above 0.1 of the peak
    peaks = np.flatnonzero((p[1:-1] > p[:-2]) & (p[1:-1] > p[2:]) & (p[1:-1] > 0.1)) + 1
    print("%-12s peaks at" % name, np.round(z[peaks], 2))

print("true heights:", z_true.round(2))
