"""Penalized buckling-load shape optimization for clamped plates on uniform grids."""

from .grid import Ball, Box, Field, Grid, GridError, Support, build_grid, connected_components, support_of
from .spectral import EigenResult, NonConvergence, Objective, min_eigenpair, rayleigh_quotient
from .theory import (
    PenaltyKind,
    PenaltyParams,
    Thresholds,
    al_constant,
    ball_buckling_load,
    bessel_first_zero,
    penalty,
    thresholds,
    unit_ball_volume,
)
from .optimizer import (
    ConfigError,
    OptimizeConfig,
    OptimizeResult,
    Strategy,
    certify_result,
    minimize_penalized,
)
from .diagnostics import assemble_report

__version__ = "0.1.0"
