import math

import mpmath as mp
import numpy as np
import pytest
import scipy.special as sps
from hypothesis import given, settings
from hypothesis import strategies as st

from clampedplate.grid import Box, Field, build_grid
from clampedplate.theory import (
    PenaltyKind,
    PenaltyParams,
    al_constant,
    ball_buckling_load,
    bessel_first_zero,
    bessel_j,
    penalized_value,
    penalty,
    thresholds,
    unit_ball_volume,
)

mp.mp.dps = 40


def mp_zero(nu):
    return mp.besseljzero(mp.mpf(nu), 1)


def mp_thresholds(n, omega0, eps):
    """Independent high-precision evaluation, using the explicit quadratic-formula root."""
    n, omega0, eps = mp.mpf(n), mp.mpf(omega0), mp.mpf(eps)
    w = mp.pi ** (n / 2) / mp.gamma(n / 2 + 1)
    lam = mp_zero(n / 2) ** 2
    c = 2 ** (2 / n) * mp_zero(n / 2 - 1) ** 2 / lam
    e1 = (omega0 / w) ** (2 / n) * omega0 / lam
    e0 = min(e1, c * (2 / n) / e1)
    x = eps * e1
    a0 = (1 + x - mp.sqrt(1 + 2 * x + x * x - 4 * c * x)) / (2 * x)
    return dict(omega_n=w, lambda_ball_unit=lam, c_n=c, eps1=e1, eps0=e0, alpha0=a0)


# -- penalty ----------------------------------------------------------------


def test_penalty_values():
    nr = PenaltyParams("non_rewarding", 0.1, 2.0)
    rw = PenaltyParams("rewarding", 0.1, 2.0)
    assert penalty(nr, 2.0) == 0.0 and penalty(rw, 2.0) == 0.0
    assert penalty(nr, 2.5) == pytest.approx(5.0, abs=1e-12)
    assert penalty(rw, 2.5) == pytest.approx(5.0, abs=1e-12)
    assert penalty(nr, 1.0) == 0.0
    assert penalty(rw, 1.0) == pytest.approx(-0.1, abs=1e-15)
    assert penalty(rw, 0.0) == pytest.approx(-0.2, abs=1e-15)


def test_penalty_rejects_negative_volume():
    with pytest.raises(ValueError):
        penalty(PenaltyParams("rewarding", 0.1, 1.0), -1e-3)


@pytest.mark.parametrize("eps,omega0", [(0.0, 1.0), (-1.0, 1.0), (0.1, 0.0)])
def test_penalty_params_validation(eps, omega0):
    with pytest.raises(ValueError):
        PenaltyParams("rewarding", eps, omega0)


@settings(max_examples=60, deadline=None)
@given(eps=st.floats(1e-3, 10.0), w0=st.floats(0.1, 10.0), s=st.floats(0.0, 20.0))
def test_penalty_properties(eps, w0, s):
    nr = PenaltyParams(PenaltyKind.NON_REWARDING, eps, w0)
    rw = PenaltyParams(PenaltyKind.REWARDING, eps, w0)
    ds = 1e-3
    for p in (nr, rw):
        assert penalty(p, s + ds) >= penalty(p, s)
        # Lipschitz with constant max(eps, 1/eps)
        assert abs(penalty(p, s + ds) - penalty(p, s)) <= max(eps, 1 / eps) * ds * (1 + 1e-9)
    assert penalty(rw, s + ds) > penalty(rw, s)
    if s <= w0:
        assert penalty(rw, s) <= penalty(nr, s)
    else:
        assert penalty(rw, s) == penalty(nr, s)


def test_penalized_value():
    g = build_grid(2, 16, Box(1.0))
    assert penalized_value(g.zeros(), PenaltyParams("rewarding", 0.1, 0.5))[0] == math.inf
    v = np.zeros(g.shape)
    v[8, 8] = 1.0
    f = Field(g, v)
    h2 = g.spacing**2
    i, r, vol = penalized_value(f, PenaltyParams("non_rewarding", 0.1, h2))
    assert vol == pytest.approx(h2) and i == pytest.approx(r) and r == pytest.approx(5 / h2)
    i, r, _ = penalized_value(f, PenaltyParams("rewarding", 0.1, 2 * h2))
    assert i == pytest.approx(r - 0.1 * h2, rel=1e-14)


# -- closed forms -------------------------------------------------------------


@pytest.mark.parametrize("n", range(1, 9))
def test_unit_ball_volume(n):
    exact = mp.pi ** (mp.mpf(n) / 2) / mp.gamma(mp.mpf(n) / 2 + 1)
    assert unit_ball_volume(n) == pytest.approx(float(exact), rel=1e-14)


def test_unit_ball_volume_known():
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    assert unit_ball_volume(4) == pytest.approx(math.pi**2 / 2, rel=1e-15)


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
def test_bessel_j_matches_scipy(nu):
    for x in (0.3, 1.0, 4.7, 9.9):
        assert bessel_j(nu, x) == pytest.approx(sps.jv(nu, x), abs=1e-13)
    # series cancellation grows like exp(x)
    assert bessel_j(nu, 17.0) == pytest.approx(sps.jv(nu, 17.0), abs=1e-9)


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0])
def test_bessel_first_zero_matches_mpmath(nu):
    assert abs(bessel_first_zero(nu) - float(mp_zero(nu))) <= 1e-10


def test_bessel_first_zero_known_values():
    assert bessel_first_zero(0) == pytest.approx(2.4048255577, abs=1e-10)
    assert bessel_first_zero(1) == pytest.approx(3.8317059702, abs=1e-10)
    assert bessel_first_zero(0.5) == pytest.approx(math.pi, abs=1e-12)
    assert bessel_first_zero(0) < bessel_first_zero(1) < bessel_first_zero(2)


def test_bessel_first_zero_rejects_bad_input():
    with pytest.raises(ValueError):
        bessel_first_zero(-1.0)
    with pytest.raises(ArithmeticError):
        bessel_first_zero(30.0)


def test_ball_buckling_load_values():
    j11 = float(mp_zero(1))
    assert ball_buckling_load(2, math.pi) == pytest.approx(j11**2, rel=1e-12)
    assert ball_buckling_load(2, math.pi) == pytest.approx(14.68197, abs=1e-5)
    assert ball_buckling_load(2, math.pi / 4) == pytest.approx(4 * j11**2, rel=1e-12)
    assert ball_buckling_load(2, 2 * math.pi) == pytest.approx(0.5 * j11**2, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 6), v=st.floats(1e-2, 1e2), t=st.floats(0.1, 10.0))
def test_ball_buckling_scaling_law(n, v, t):
    assert ball_buckling_load(n, t**n * v) == pytest.approx(t**-2 * ball_buckling_load(n, v), rel=1e-12)


@pytest.mark.parametrize("n", range(2, 9))
def test_al_constant_matches_oracle(n):
    ref = mp_thresholds(n, 1.0, 0.1)["c_n"]
    assert abs(al_constant(n) - float(ref)) <= 1e-10
    assert 0 < al_constant(n) < 1


def test_al_constant_known_values():
    assert al_constant(2) == pytest.approx(2 * (bessel_first_zero(0) / bessel_first_zero(1)) ** 2, rel=1e-14)
    assert al_constant(2) == pytest.approx(0.7877, abs=1e-4)
    assert al_constant(3) == pytest.approx(2 ** (2 / 3) * (math.pi / bessel_first_zero(1.5)) ** 2, rel=1e-12)


def test_al_constant_increasing_from_three():
    c = [al_constant(n) for n in range(3, 12)]
    assert all(a < b for a, b in zip(c, c[1:]))


def test_al_constant_dips_from_two_to_three():
    # the chain formula is not monotone at the start; the oracle agrees
    ref = mp_thresholds(2, 1.0, 0.1)["c_n"], mp_thresholds(3, 1.0, 0.1)["c_n"]
    assert ref[0] > ref[1]
    assert al_constant(2) > al_constant(3)


def test_al_constant_override():
    assert al_constant(2, 0.5) == 0.5


# -- thresholds -----------------------------------------------------------------


CASES = [(2, math.pi, 0.05), (2, math.pi, 0.19), (2, 1.0, 1e-3), (3, 2.0, 0.3), (4, 1.5, 0.2), (2, 5.0, 1.0), (6, 0.7, 0.05)]


@pytest.mark.parametrize("n,w0,eps", CASES)
def test_thresholds_match_oracle(n, w0, eps):
    thr = thresholds(n, w0, eps).as_dict()
    ref = mp_thresholds(n, w0, eps)
    for key, val in ref.items():
        assert abs(thr[key] - float(val)) <= 1e-10 * max(1.0, abs(float(val))), key


def test_eps1_example():
    assert thresholds(2, math.pi, 0.1).eps1 == pytest.approx(math.pi / bessel_first_zero(1) ** 2, rel=1e-14)
    assert thresholds(2, math.pi, 0.1).eps1 == pytest.approx(0.21398, abs=1e-4)


def test_alpha0_limit_is_c_n():
    for n in (2, 3, 4):
        assert abs(thresholds(n, 1.0, 1e-6).alpha0 - al_constant(n)) <= 1e-4


def test_alpha0_tiny_eps_is_stable():
    a = thresholds(2, 1.0, 1e-14).alpha0
    assert abs(a - al_constant(2)) < 1e-12


@pytest.mark.parametrize("n,w0", [(2, math.pi), (2, 1.0), (3, 2.0), (4, 3.0), (5, 1.0)])
def test_threshold_invariants(n, w0):
    e1 = thresholds(n, w0, 1.0).eps1
    eps = np.linspace(e1 * 1e-3, e1, 40)
    a = [thresholds(n, w0, e).alpha0 for e in eps]
    for e, x in zip(eps, a):
        t = thresholds(n, w0, e)
        assert t.eps0 <= t.eps1
        assert 0.5 <= x < 1
    assert all(p > q for p, q in zip(a, a[1:]))


def test_alpha0_half_bound_region():
    # alpha0 >= 1/2 holds exactly while eps * eps1 <= 4 c_n - 2
    c = al_constant(2)
    w0 = 8.0
    thr = thresholds(2, w0, 1.0)
    x_max = 4 * c - 2
    assert thr.eps1**2 > x_max
    below = thresholds(2, w0, 0.99 * x_max / thr.eps1).alpha0
    above = thresholds(2, w0, thr.eps1).alpha0
    assert below >= 0.5 > above


def test_thresholds_reject_bad_input():
    with pytest.raises(ValueError):
        thresholds(2, 0.0, 0.1)
    with pytest.raises(ValueError):
        thresholds(2, 1.0, 0.0)
