"""
Discrete minimization of the penalized buckling functional.

``I(v) = R(v) + p(|{v != 0}|)`` is minimized over zero-extended node fields in
the container. For a fixed support the best field is the first eigenfunction,
so the search runs over supports: each outer step solves the eigenproblem on
the current support and tries a handful of candidate supports built from that
eigenfunction (level sets, a grown and a peeled boundary layer). The best
candidate is accepted only if it lowers ``I``, hence the history is
non-increasing.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import shapes
from .grid import (
    Ball,
    Box,
    Field,
    Grid,
    Support,
    boundary_faces,
    build_grid,
    make_shape,
    support_of,
    transform_support,
)
from .spectral import EigenResult, NonConvergence, Objective, min_eigenpair, pencil
from .theory import PenaltyKind, PenaltyParams, Thresholds, penalty

__all__ = [
    "Strategy",
    "OptimizeConfig",
    "OptimizeResult",
    "HistoryRow",
    "CertificateRecord",
    "ConfigError",
    "EmptySupportCollapse",
    "minimize_penalized",
    "certify_result",
    "dichotomy_clipping",
    "threshold_ladder",
]

log = logging.getLogger(__name__)

ACCEPT_DECREASE = 1e-10


class ConfigError(ValueError):
    pass


class EmptySupportCollapse(RuntimeError):
    pass


class Strategy(str, enum.Enum):
    THRESHOLD_SWEEP = "threshold_sweep"
    RELAXED_DESCENT = "relaxed_descent"


@dataclass(frozen=True)
class OptimizeConfig:
    """
    Everything a run depends on.

    ``init`` is ``"ball"`` (centered ball of volume ``init_volume_factor *
    omega0``), ``"full_container"`` or a path to a result JSON or field CSV
    whose support is used as the start.
    """

    dim: int
    cells_per_side: int
    container: Union[Box, Ball]
    penalty: PenaltyParams
    objective: Objective = Objective.BUCKLING
    strategy: Strategy = Strategy.THRESHOLD_SWEEP
    init: str = "ball"
    init_volume_factor: float = 1.5
    sweep_size: int = 8
    eig_tol: float = 1e-8
    max_outer: int = 200
    stall_limit: int = 5
    seed: int = 0
    move_fraction: float = 0.01
    relaxed_iters: int = 60

    def __post_init__(self):
        object.__setattr__(self, "objective", Objective(self.objective))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.sweep_size < 4:
            raise ConfigError(f"sweep_size must be >= 4, got {self.sweep_size}")
        if self.max_outer < 1:
            raise ConfigError(f"max_outer must be >= 1, got {self.max_outer}")
        if self.stall_limit < 1:
            raise ConfigError(f"stall_limit must be >= 1, got {self.stall_limit}")
        measure = self.container.measure(self.dim)
        if not self.penalty.omega0 < 0.9 * measure:
            raise ConfigError(
                f"omega0 = {self.penalty.omega0} must be below 0.9 * container measure = {0.9 * measure}"
            )


@dataclass(frozen=True)
class HistoryRow:
    iteration: int
    I: float
    lam: float
    volume: float
    moved_cells: int


@dataclass(frozen=True, eq=False)
class OptimizeResult:
    support: Support
    eig: EigenResult
    i_eps: float
    volume: float
    history: list
    converged: bool
    clipping_flag: bool
    params: PenaltyParams
    stop_reason: str = ""
    config: Optional[OptimizeConfig] = None

    @property
    def grid(self) -> Grid:
        return self.support.grid


def threshold_ladder(m: int) -> list[float]:
    """``[0] + [0.5 * 2**-j for j in 0..m-2]``."""
    return [0.0] + [0.5 * 2.0**-j for j in range(m - 1)]


@dataclass
class _State:
    support: Support
    eig: EigenResult
    I: float


def _evaluate(support: Support, cfg: OptimizeConfig) -> Optional[_State]:
    if support.count == 0:
        return None
    try:
        eig = min_eigenpair(support, cfg.objective, tol=cfg.eig_tol)
    except NonConvergence as exc:
        log.warning("candidate with %d cells skipped: %s", support.count, exc)
        return None
    # the eigenfunction may live on a proper subset (e.g. one component of a
    # disconnected support); that subset carries the same quotient
    own = Support(support.grid, support.active & (np.abs(eig.field.values) > 1e-8 * np.max(np.abs(eig.field.values))))
    if own.count < support.count:
        support = own
        eig = replace(eig, field=eig.field.restrict(own))
    return _State(support, eig, eig.lam + penalty(cfg.penalty, support.volume))


def _layer_moves(state: _State, count: int) -> tuple[Support, Support]:
    """Grow by the ``count`` steepest outside neighbours; peel the ``count`` flattest boundary cells."""
    s = state.support
    grid = s.grid
    u = np.abs(state.eig.field.values)
    ins, outs = boundary_faces(s)
    outs_ok = grid.mask[tuple(outs.T)]
    ins_o, outs_o = ins[outs_ok], outs[outs_ok]

    grow = s.active.copy()
    if len(outs_o):
        flat_out = np.ravel_multi_index(tuple(outs_o.T), grid.shape)
        slope = u[tuple(ins_o.T)] / grid.spacing
        # steepest one-sided slope per outside node
        order = np.lexsort((flat_out, -slope))
        uniq, first = np.unique(flat_out[order], return_index=True)
        best = slope[order][first]
        rank = np.lexsort((uniq, -best))[:count]
        grow.ravel()[uniq[rank]] = True

    peel = s.active.copy()
    if len(ins):
        flat_in = np.unique(np.ravel_multi_index(tuple(ins.T), grid.shape))
        vals = u.ravel()[flat_in]
        rank = np.lexsort((flat_in, vals))[:count]
        peel.ravel()[flat_in[rank]] = False
    return Support(grid, grow), Support(grid, peel)


def _candidates(state: _State, cfg: OptimizeConfig, fraction: float) -> list[Support]:
    u = np.abs(state.eig.field.values)
    umax = float(u.max())
    out = []
    for tau in threshold_ladder(cfg.sweep_size):
        out.append(Support(state.support.grid, state.support.active & (u > tau * umax)))
    count = max(1, int(fraction * state.support.count))
    out.extend(_layer_moves(state, count))
    seen = {state.support.active.tobytes()}
    uniq = []
    for c in out:
        key = c.active.tobytes()
        if c.count == 0 or key in seen:
            continue
        seen.add(key)
        uniq.append(c)
    return uniq


def _initial_support(grid: Grid, cfg: OptimizeConfig) -> Support:
    init = cfg.init
    if init == "ball":
        ball = shapes.ball_of_volume(grid.center, cfg.init_volume_factor * cfg.penalty.omega0)
        return make_shape(grid, ball)
    if init == "full_container":
        return Support(grid, grid.mask)
    from .io import load_support

    return load_support(Path(init), grid)


def worker_count() -> int:
    """``PLATE_THREADS`` if set, else the hardware parallelism."""
    raw = os.environ.get("PLATE_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError(f"PLATE_THREADS must be a positive integer, got {raw!r}") from exc
        if n < 1:
            raise ConfigError(f"PLATE_THREADS must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def _evaluate_all(cands: list[Support], cfg: OptimizeConfig, workers: int) -> list[Optional[_State]]:
    # candidates are independent; results come back in candidate order
    if workers <= 1 or len(cands) <= 1:
        return [_evaluate(c, cfg) for c in cands]
    with ThreadPoolExecutor(max_workers=min(workers, len(cands))) as pool:
        return list(pool.map(lambda c: _evaluate(c, cfg), cands))


def _sweep(state: _State, cfg: OptimizeConfig, history: list) -> tuple[_State, bool, str]:
    workers = worker_count()
    fraction = cfg.move_fraction
    stalls = 0
    last_keys = None
    start = len(history)
    for it in range(start, start + cfg.max_outer):
        cands = _candidates(state, cfg, fraction)
        keys = [c.active.tobytes() for c in cands]
        if stalls and keys == last_keys:
            return state, True, "support unchanged"
        last_keys = keys
        best = None
        for ev in _evaluate_all(cands, cfg, workers):
            if ev is None:
                continue
            # ties go to the smaller volume, then to ladder order
            if best is None or (ev.I, ev.support.count) < (best.I, best.support.count):
                best = ev
        if best is None and state.support.count == 0:
            raise EmptySupportCollapse("all candidates are empty")
        if best is not None and best.I < state.I - ACCEPT_DECREASE:
            moved = int(np.count_nonzero(best.support.active ^ state.support.active))
            state = best
            stalls = 0
            history.append(HistoryRow(it + 1, state.I, state.eig.lam, state.support.volume, moved))
            continue
        stalls += 1
        fraction *= 0.5
        if stalls >= cfg.stall_limit:
            return state, True, "stall limit"
    return state, False, "max_outer reached"


def _relaxed_descent(grid: Grid, start: Support, cfg: OptimizeConfig) -> Support:
    """
    Preconditioned descent on ``R(v) + p(sum h^n s(v_i))`` with the smooth
    count ``s(x) = x^2 / (x^2 + d^2)``, ``d = h``, over all container nodes.
    The iterate is kept at unit denominator energy so the count cannot be
    lowered by shrinking ``v``.
    """
    full = Support(grid, grid.mask)
    a, k, index = pencil(full, cfg.objective)
    lu = splu(a.tocsc(), permc_spec="MMD_AT_PLUS_A")
    w = grid.cell_volume
    d2 = grid.spacing**2
    params = cfg.penalty

    def pslope(vol):
        if vol >= params.omega0:
            return 1.0 / params.eps
        return params.eps if params.kind is PenaltyKind.REWARDING else 0.0

    def value(v):
        vol = w * float(np.sum(v * v / (v * v + d2)))
        return float(v @ (a @ v)) + penalty(params, vol), vol

    eig0 = min_eigenpair(start, cfg.objective, tol=cfg.eig_tol)
    v = eig0.field.values.ravel()[index].copy()
    rng = np.random.default_rng(cfg.seed)
    v += 1e-3 * np.max(np.abs(v)) * rng.standard_normal(len(v)) * (np.abs(v) > 0)
    v /= math.sqrt(float(v @ (k @ v)))
    f, vol = value(v)
    for _ in range(cfg.relaxed_iters):
        rq = float(v @ (a @ v))
        g = 2.0 * (a @ v - rq * (k @ v)) + pslope(vol) * w * 2.0 * v * d2 / (v * v + d2) ** 2
        d = -lu.solve(g)
        slope = float(g @ d)
        if slope >= 0:
            break
        step = 1.0
        while step > 1e-8:
            trial = v + step * d
            trial /= math.sqrt(float(trial @ (k @ trial)))
            ft, vt = value(trial)
            if ft <= f + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            break
        v, f, vol = trial, ft, vt
    vals = np.zeros(grid.shape)
    vals.ravel()[index] = v
    return support_of(Field(grid, vals), grid.spacing)


def dichotomy_clipping(support: Support, omega0: float) -> bool:
    """
    Whether the support, rescaled to volume ``omega0`` about its barycenter
    and recentered at the container center, leaves the container.
    """
    if support.count == 0:
        return False
    grid = support.grid
    t = (omega0 / support.volume) ** (1.0 / grid.dim)
    shift = grid.center - t * support.barycenter()
    return transform_support(support, t, shift)[1]


def minimize_penalized(config: OptimizeConfig) -> OptimizeResult:
    """
    Minimize the penalized functional for ``config``.

    Returns the final support, its eigenpair and the accepted-step history.
    ``converged`` is false only when ``max_outer`` ran out.
    """
    grid = build_grid(config.dim, config.cells_per_side, config.container)
    start = _initial_support(grid, config)
    if start.count == 0:
        raise EmptySupportCollapse("initial support is empty")
    if config.strategy is Strategy.RELAXED_DESCENT:
        start = _relaxed_descent(grid, start, config)
        if start.count == 0:
            raise EmptySupportCollapse("relaxed descent collapsed to an empty support")
    state = _evaluate(start, config)
    if state is None:
        raise NonConvergence(0, math.nan, "eigensolve on the initial support failed")
    history = [HistoryRow(0, state.I, state.eig.lam, state.support.volume, 0)]
    state, converged, reason = _sweep(state, config, history)
    return OptimizeResult(
        support=state.support,
        eig=state.eig,
        i_eps=state.I,
        volume=state.support.volume,
        history=history,
        converged=converged,
        clipping_flag=dichotomy_clipping(state.support, config.penalty.omega0),
        params=config.penalty,
        stop_reason=reason,
        config=config,
    )


@dataclass(frozen=True)
class CertificateRecord:
    statement: str
    passed: Optional[bool]
    kind: PenaltyKind
    eps: float
    volume: float
    omega0: float
    tol_vol: float
    details: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.passed is None:
            return "N/A"
        return "PASS" if self.passed else "FAIL"


def certify_result(
    result: OptimizeResult, thr: Thresholds, params: PenaltyParams, tol_vol: Optional[float] = None
) -> CertificateRecord:
    """
    State which volume conclusion the discrete optimum instantiates.

    ``tol_vol`` is absolute and defaults to ``0.02 * omega0``.

    Raises
    ------
    ValueError
        If ``params`` differ from the ones the result was computed with.
    """
    if params != result.params:
        raise ValueError(f"certificate params {params} do not match the run's {result.params}")
    w0 = params.omega0
    tol = 0.02 * w0 if tol_vol is None else float(tol_vol)
    v = result.volume
    base = dict(kind=params.kind, eps=params.eps, volume=v, omega0=w0, tol_vol=tol)
    details = dict(eps1=thr.eps1, eps0=thr.eps0, alpha0=thr.alpha0, clipping_flag=result.clipping_flag)

    if params.kind is PenaltyKind.NON_REWARDING:
        if params.eps > thr.eps1:
            return CertificateRecord("no guarantee: eps > eps1", None, details=details, **base)
        ok = abs(v - w0) <= tol
        return CertificateRecord("non-rewarding, eps <= eps1: volume equals omega0", ok, details=details, **base)

    if params.eps > thr.eps0:
        return CertificateRecord("no guarantee: rewarding with eps > eps0", None, details=details, **base)
    in_bracket = thr.alpha0 * w0 - tol <= v <= w0 + tol
    exact = v >= w0 - tol
    details.update(in_bracket=in_bracket, case=("a" if exact else "b"))
    if not in_bracket:
        return CertificateRecord("rewarding: volume outside [alpha0*omega0, omega0]", False, details=details, **base)
    if exact:
        return CertificateRecord("rewarding, case a: volume equals omega0", True, details=details, **base)
    if result.clipping_flag:
        return CertificateRecord("rewarding, case b: rescaled optimum does not fit", True, details=details, **base)
    details["dichotomy_violation"] = True
    return CertificateRecord(
        "rewarding: volume below omega0 but the rescaled optimum fits (dichotomy violated)",
        False, details=details, **base,
    )
