"""Test geometries rasterized by :func:`clampedplate.grid.make_shape`."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import GridError

__all__ = ["Ball", "Ellipse", "Rectangle", "Annulus", "Union", "ball_of_volume"]


def _dist2(pts, center):
    return sum((p - c) ** 2 for p, c in zip(pts, center))


@dataclass(frozen=True)
class Ball:
    center: Sequence[float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise GridError(f"radius must be > 0, got {self.radius}")

    def contains(self, pts):
        return _dist2(pts, self.center) < self.radius**2


@dataclass(frozen=True)
class Ellipse:
    center: Sequence[float]
    semiaxes: Sequence[float]

    def __post_init__(self):
        if min(self.semiaxes) <= 0:
            raise GridError("semiaxes must be positive")

    def contains(self, pts):
        return sum(((p - c) / a) ** 2 for p, c, a in zip(pts, self.center, self.semiaxes)) < 1.0


@dataclass(frozen=True)
class Rectangle:
    """Half-open box ``lo <= x < hi`` (half-open so abutting rectangles tile)."""

    lo: Sequence[float]
    hi: Sequence[float]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.lo, self.hi)):
            raise GridError("rectangle needs lo < hi on every axis")

    def contains(self, pts):
        out = np.ones(np.shape(pts[0]), dtype=bool)
        for p, a, b in zip(pts, self.lo, self.hi):
            out &= (p >= a) & (p < b)
        return out


@dataclass(frozen=True)
class Annulus:
    center: Sequence[float]
    r_in: float
    r_out: float

    def __post_init__(self):
        if not 0 <= self.r_in < self.r_out:
            raise GridError(f"annulus needs 0 <= r_in < r_out, got {self.r_in}, {self.r_out}")

    def contains(self, pts):
        d2 = _dist2(pts, self.center)
        return (d2 >= self.r_in**2) & (d2 < self.r_out**2)


@dataclass(frozen=True)
class Union:
    parts: tuple

    def __init__(self, parts):
        if len(parts) == 0:
            raise GridError("union of nothing")
        object.__setattr__(self, "parts", tuple(parts))

    def contains(self, pts):
        out = np.zeros(np.shape(pts[0]), dtype=bool)
        for s in self.parts:
            out |= s.contains(pts)
        return out


def ball_of_volume(center: Sequence[float], volume: float) -> Ball:
    """Ball with ``omega_n r^n = volume`` in ``len(center)`` dimensions."""
    from .theory import unit_ball_volume

    n = len(center)
    return Ball(tuple(center), (volume / unit_ball_volume(n)) ** (1.0 / n))
