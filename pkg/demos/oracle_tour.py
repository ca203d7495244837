"""Checks on the closed-form planar minimiser and its cylindrical lift:
Euler-Lagrange residual, Hopf differential, frequency and doubling.

    python3 demos/oracle_tour.py
"""

import numpy as np

from ericksen_lab import frequency as fq
from ericksen_lab.grid import box_domain
from ericksen_lab.oracle import (Homogeneous2DMinimizer, el_residual, hopf_differential,
                                 lift_cylinder, planar_grid, sample_circle)

m = Homogeneous2DMinimizer(k=4.0)
print(f"alpha = {m.alpha}")

for n in (1024, 2048, 4096):
    print(f"angular residual with {n} samples: {el_residual(sample_circle(m, n), m.k, m.alpha):.3e}")

for h in (1 / 64, 1 / 128, 1 / 256):
    v, X, Y = planar_grid(m, h)
    R = np.hypot(X, Y)
    om = hopf_differential(v, h, m.k)
    print(f"max |Hopf| on 0.3 <= r <= 0.9 at h = 1/{round(1 / h)}: "
          f"{np.nanmax(np.abs(om[(R >= 0.3) & (R <= 0.9)])):.4f}")

lift = lift_cylinder(m, box_domain((65, 65, 65), 1 / 64, (-0.5, -0.5, -0.5)))
prof = fq.frequency_profile(lift, (0, 0, 0), [0.1, 0.2, 0.3, 0.4])
for r, N in zip(prof.radii, prof.N):
    rep = fq.check_doubling(lift, (0, 0, 0), r / 2, r)
    print(f"r = {r:.2f}: N = {N:.4f}, log2 H(r)/H(r/2) = {rep.log2_ratio:.4f}")
