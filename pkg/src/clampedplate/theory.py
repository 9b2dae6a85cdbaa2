"""
Closed-form quantities: volume penalties, ball buckling loads and the
volume thresholds for the penalized problem.

All functions are pure. The infinite Rayleigh quotient of the zero field is
represented by ``math.inf``, which orders above every finite value and stays
infinite when a finite penalty is added.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "PenaltyKind",
    "PenaltyParams",
    "Thresholds",
    "penalty",
    "penalized_value",
    "unit_ball_volume",
    "bessel_j",
    "bessel_first_zero",
    "ball_buckling_load",
    "al_constant",
    "thresholds",
]


class PenaltyKind(str, enum.Enum):
    NON_REWARDING = "non_rewarding"
    REWARDING = "rewarding"


@dataclass(frozen=True)
class PenaltyParams:
    kind: PenaltyKind
    eps: float
    omega0: float

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind(self.kind))
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")


def penalty(params: PenaltyParams, s: float) -> float:
    """
    Piecewise-linear volume penalty.

    Above the target volume both kinds charge ``(s - omega0) / eps``. Below it
    the non-rewarding penalty is zero and the rewarding one pays back
    ``eps * (s - omega0)`` (a negative amount).

    >>> penalty(PenaltyParams("non_rewarding", 0.1, 1.0), 1.2)
    2.0000000000000004
    """
    if s < 0:
        raise ValueError(f"volume must be >= 0, got {s}")
    d = s - params.omega0
    if d >= 0:
        return d / params.eps
    if params.kind is PenaltyKind.REWARDING:
        return params.eps * d
    return 0.0


def penalized_value(field, params: PenaltyParams, objective=None, threshold: float | None = 0.0):
    """
    Evaluate the penalized functional on a field.

    Returns
    -------
    (I, R, volume)
        ``I = R + penalty(volume)``, where ``volume`` is the measure of the
        thresholded support and ``R`` the Rayleigh quotient.
    """
    from .grid import support_of
    from .spectral import Objective, rayleigh_quotient

    if objective is None:
        objective = Objective.BUCKLING
    volume = support_of(field, threshold).volume
    r = rayleigh_quotient(field, objective)
    if math.isinf(r):
        return math.inf, r, volume
    return r + penalty(params, volume), r, volume


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n via the even/odd closed forms."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if n % 2 == 0:
        k = n // 2
        return math.pi**k / math.factorial(k)
    k = (n - 1) // 2
    # 2 (k!) (4 pi)^k / (2k+1)!
    return 2.0 * math.factorial(k) * (4.0 * math.pi) ** k / math.factorial(2 * k + 1)


def bessel_j(nu: float, x: float) -> float:
    """
    Bessel function of the first kind from its power series.

    Cancellation costs about ``exp(x) * 1e-16`` absolute accuracy, so values
    are good to ~1e-13 for ``x <= 10`` and ~1e-9 at ``x = 20``; the first
    zeros searched here all lie below 10.
    """
    if x == 0.0:
        return 1.0 if nu == 0 else 0.0
    q = 0.25 * x * x
    term = (0.5 * x) ** nu / math.gamma(nu + 1.0)
    terms = [term]
    k = 0
    while True:
        k += 1
        term *= -q / (k * (k + nu))
        terms.append(term)
        if abs(term) < 1e-17 * abs(terms[0]) and k > q:
            break
    return math.fsum(terms)


@lru_cache(maxsize=64)
def bessel_first_zero(nu: float, *, xmax: float = 20.0, step: float = 0.01, tol: float = 1e-13) -> float:
    """
    First positive zero of ``J_nu`` by sign scan on ``(0, xmax]`` and bisection.

    >>> round(bessel_first_zero(0), 10)
    2.4048255577
    """
    if nu < 0:
        raise ValueError(f"order must be >= 0, got {nu}")
    a = step
    fa = bessel_j(nu, a)
    while a < xmax:
        b = min(a + step, xmax)
        fb = bessel_j(nu, b)
        if fa == 0.0:
            return a
        if fa * fb < 0:
            break
        a, fa = b, fb
    else:
        raise ArithmeticError(f"no sign change of J_{nu} on (0, {xmax}]")
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = bessel_j(nu, m)
        if fm == 0.0:
            return m
        if fa * fm < 0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def ball_buckling_load(n: int, volume: float) -> float:
    """Buckling load of a ball of the given volume, ``(omega_n/V)^(2/n) j_{n/2,1}^2``."""
    if not volume > 0:
        raise ValueError(f"volume must be > 0, got {volume}")
    return (unit_ball_volume(n) / volume) ** (2.0 / n) * bessel_first_zero(n / 2) ** 2


def al_constant(n: int, override: float | None = None) -> float:
    """
    Constant ``c_n`` of the comparison ``Lambda(Omega) > c_n Lambda(Omega#)``.

    Uses Payne's inequality against the second Dirichlet eigenvalue followed
    by the Krahn-Szego bound for it, which gives
    ``c_n = 2^(2/n) j_{n/2-1,1}^2 / j_{n/2,1}^2``.
    """
    if override is not None:
        return float(override)
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    c = 2.0 ** (2.0 / n) * (bessel_first_zero(n / 2 - 1) / bessel_first_zero(n / 2)) ** 2
    if not 0 < c < 1:
        raise ArithmeticError(f"c_{n} = {c} outside (0, 1)")
    return c


@dataclass(frozen=True)
class Thresholds:
    eps1: float
    eps0: float
    alpha0: float
    c_n: float
    lambda_ball_unit: float
    omega_n: float

    def as_dict(self) -> dict:
        return dict(
            omega_n=self.omega_n,
            lambda_ball_unit=self.lambda_ball_unit,
            c_n=self.c_n,
            eps1=self.eps1,
            eps0=self.eps0,
            alpha0=self.alpha0,
        )


def thresholds(n: int, omega0: float, eps: float, c_n: float | None = None) -> Thresholds:
    """
    Penalty thresholds for dimension ``n`` and target volume ``omega0``.

    ``eps1`` bounds the penalty parameter below which the non-rewarding
    optimum has exactly the target volume; ``eps0 <= eps1`` is the bound for
    the volume dichotomy of the rewarding problem; ``alpha0`` is the lower
    volume fraction guaranteed for the rewarding problem at the given
    ``eps``.
    """
    if not omega0 > 0 or not eps > 0:
        raise ValueError("omega0 and eps must be > 0")
    w = unit_ball_volume(n)
    lam1 = bessel_first_zero(n / 2) ** 2
    c = al_constant(n, c_n)
    eps1 = (omega0 / w) ** (2.0 / n) * omega0 / lam1
    eps0 = min(eps1, c * (2.0 / n) / eps1)
    x = eps * eps1
    disc = 1.0 + 2.0 * x + x * x - 4.0 * c * x
    if disc < 0:
        raise ArithmeticError(f"negative discriminant {disc} (c_n = {c})")
    # smaller root of x a^2 - (1 + x) a + c, in the cancellation-free form
    alpha0 = 2.0 * c / (1.0 + x + math.sqrt(disc))
    return Thresholds(eps1, eps0, alpha0, c, lam1, w)
