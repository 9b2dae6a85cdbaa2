"""
Buckling load of the unit disk under grid refinement.

The disk's load is the squared first zero of J_1. The finite-difference
value approaches it from below at first order in h, so a Richardson step on
the two finest grids lands within a fraction of a percent.
"""

import math

from clampedplate import Ball, Support, bessel_first_zero, build_grid, min_eigenpair

exact = bessel_first_zero(1.0) ** 2
print(f"j_11^2 = {exact:.10f}")

lams = []
for n in (32, 64, 128, 256):
    g = build_grid(2, n, Ball(1.0))
    eig = min_eigenpair(Support(g, g.mask))
    lams.append(eig.lam)
    print(f"N = {n:4d}  h = {g.spacing:.5f}  lambda = {eig.lam:.6f}  rel. error = {eig.lam / exact - 1:+.3%}  residual = {eig.residual:.1e}")

p = math.log2((lams[-2] - lams[-3]) / (lams[-1] - lams[-2]))
rich = lams[-1] + (lams[-1] - lams[-2]) / (2**p - 1)
print(f"observed order {p:.2f}; extrapolated {rich:.6f} ({rich / exact - 1:+.3%})")
