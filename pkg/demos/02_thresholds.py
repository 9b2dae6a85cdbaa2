"""
Penalty thresholds in a few dimensions.

For a target volume omega0 the non-rewarding penalty pins the volume once
eps <= eps1; the rewarding penalty guarantees volume >= alpha0 * omega0 for
eps <= eps0, and alpha0 tends to c_n as eps shrinks.
"""

import math

from clampedplate import al_constant, thresholds, unit_ball_volume

for n in range(2, 7):
    w0 = unit_ball_volume(n)  # unit ball as the target
    thr = thresholds(n, w0, 1.0)
    print(f"n = {n}: c_n = {thr.c_n:.6f}  Lambda(B1) = {thr.lambda_ball_unit:.6f}  eps1 = {thr.eps1:.6f}  eps0 = {thr.eps0:.6f}")

print()
print("alpha0 on the disk of area pi as eps decreases:")
e1 = thresholds(2, math.pi, 1.0).eps1
for frac in (1.0, 0.5, 0.1, 1e-2, 1e-4, 1e-6):
    print(f"  eps = {frac:7.0e} * eps1  alpha0 = {thresholds(2, math.pi, frac * e1).alpha0:.8f}")
print(f"  c_2 = {al_constant(2):.8f}")
