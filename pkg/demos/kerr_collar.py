"""A Kerr collar inside the Cauchy horizon.

Inside r- the Killing field d_t is spacelike near the equator, so the
boundary r = r0 needs a co-rotating mix d_t + b d_phi before any boundary
product makes sense.  This script finds b, checks that the principal symbol
is elliptic on the collar, and looks at the low end of the spectrum of the
reduced Hamiltonian on the region X next to the boundary.

Run with ``python demos/kerr_collar.py`` (about ten seconds).
"""

import math

import numpy as np

from dirac_bvp import (build_region_X, eigendecompose_X, ellipticity_certificate, find_timelike_mix,
                       horizon_radii, kerr_ef, killing_norm, locate_horizons, radial_grid)
from dirac_bvp.spectral import boundary_participation

M, a, r0 = 1.0, 0.8, 0.3
r_minus, r_plus = horizon_radii(M, a)
print(f"horizons: r- = {r_minus:.6f}, r+ = {r_plus:.6f}")
print("located from g^rr sign changes:", locate_horizons(kerr_ef(M, a), (1e-3, 4.0)))

plain = kerr_ef(M, a, 0.0, r0)
thetas = np.linspace(0.05, math.pi - 0.05, 7)
print("<d_t, d_t> on r = r0:", np.round([killing_norm(plain, [0, r0, th, 0]) for th in thetas], 3))

b = find_timelike_mix(M, a, r0)
closure = kerr_ef(M, a, b, r0)
print(f"co-rotating mix b = {b:.6f}")
print("<K, K> on r = r0:   ", np.round([killing_norm(closure, [0, r0, th, 0]) for th in thetas], 3))

# uniform ellipticity: -g^{ab} xi_a xi_b >= delta |xi|^2 in the slice metric
points = [[0, r, th, 0] for r in (0.3, 0.32, 0.345) for th in thetas]
cert = ellipticity_certificate(closure, points)
print(f"ellipticity margin delta = {cert.delta:.4f} (identity residual {cert.identity_residual:.1e})")

grid = radial_grid(closure, r0, 0.39, 33, k=1, n_theta=8)
region = build_region_X(closure, grid, 0.345, m=0.5)
basis = eigendecompose_X(region.H.H, region.H.w)
part = boundary_participation(basis, region.H)
order = np.argsort(np.abs(basis.omega))[:8]
print(f"region X: r in [{region.r0}, {region.r_mid}], {region.H.dim} unknowns")
print("smallest |omega| and the share of each mode on the two faces:")
for i in order:
    print(f"  omega = {basis.omega[i]:+10.4f}   boundary share {part[i]:.3f}")
