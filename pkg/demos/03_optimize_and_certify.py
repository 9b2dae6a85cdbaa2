"""
Optimize the penalized load in a square and certify the volume conclusion.

Both penalties are run at eps just below their thresholds. The discrete
optimum is a disk of area close to omega0 whose load is close to the
disk's continuum value, and the certificate states which volume
conclusion the run instantiates.
"""

import math

from clampedplate import (
    Box,
    OptimizeConfig,
    PenaltyParams,
    ball_buckling_load,
    certify_result,
    connected_components,
    minimize_penalized,
    thresholds,
)

N = 64  # 128 for the full-resolution run
w0 = math.pi
thr = thresholds(2, w0, 1.0)

for kind, eps in (("non_rewarding", 0.9 * thr.eps1), ("rewarding", 0.9 * thr.eps0)):
    params = PenaltyParams(kind, eps, w0)
    res = minimize_penalized(OptimizeConfig(2, N, Box(3.0), params))
    cert = certify_result(res, thresholds(2, w0, eps), params)
    print(f"{kind}: {len(res.history) - 1} accepted steps, stop: {res.stop_reason}")
    print(f"  volume / omega0 = {res.volume / w0:.5f}, components = {len(connected_components(res.support))}")
    print(f"  I = {res.i_eps:.5f}, load = {res.eig.lam:.5f}, disk of area omega0: {ball_buckling_load(2, w0):.5f}")
    print(f"  certificate {cert.label}: {cert.statement}")
