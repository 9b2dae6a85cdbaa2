"""
Measurements of the structural properties an optimal support should have.

Boundary points are the midpoints of the faces separating an active node
from an inactive neighbor; these lie exactly on the boundary of the union of
active cells. Balls ``B_R(x0)`` are cell-counted: a node belongs to the ball
when its position is within ``R`` of ``x0``.

The doubling, nondegeneracy and density constants are existential in the
theory, so the profiles report measured values rather than pass/fail; only
positivity and inequalities with computable right-hand sides are judged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .grid import (
    Field,
    GridError,
    Support,
    boundary_faces,
    connected_components,
    gradient_magnitude,
    laplacian_apply,
    transform_support,
)
from .spectral import EigenResult, Objective, PdeResidual, min_eigenpair, pde_residual
from .theory import al_constant, ball_buckling_load

__all__ = [
    "BoundaryClassification",
    "Profile",
    "DiagnosticsReport",
    "classify_boundary",
    "check_scaling",
    "check_translation",
    "check_al",
    "check_monotonicity",
    "nested_pairs",
    "doubling_profile",
    "nondegeneracy_profile",
    "density_profile",
    "default_radius",
    "assemble_report",
]


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryClassification:
    """Inactive nodes next to the support, split by the one-sided slope into them."""

    gamma: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    gamma_tol: float
    slope: np.ndarray = field(repr=False)

    @property
    def n_gamma(self) -> int:
        return int(self.gamma.sum())

    @property
    def n_sigma(self) -> int:
        return int(self.sigma.sum())


def classify_boundary(eig: EigenResult, support: Support, gamma_tol: Optional[float] = None) -> BoundaryClassification:
    """
    Split the outer boundary layer into the free part (slope <= gamma_tol) and
    the nodal part (slope > gamma_tol).

    The slope at an inactive node ``b`` is ``max |u(a)| / h`` over its active
    face neighbors ``a``, with ``u`` restricted to the support. The default
    ``gamma_tol`` is ``h * max|lap_h u|``, the maximum taken over active
    nodes whose five-point stencil is active (a cut through the field would
    otherwise inflate it).
    """
    grid = support.grid
    u = eig.field.restrict(support)
    if gamma_tol is None:
        cross = ndimage.generate_binary_structure(grid.dim, 1)
        inner = ndimage.binary_erosion(support.active, structure=cross, border_value=0)
        lap = np.abs(laplacian_apply(u))[inner]
        gamma_tol = grid.spacing * float(np.max(lap, initial=0.0))
    ins, outs = boundary_faces(support)
    slope = np.zeros(grid.shape)
    if len(ins):
        np.maximum.at(slope, tuple(outs.T), np.abs(u.values[tuple(ins.T)]) / grid.spacing)
    layer = np.zeros(grid.shape, dtype=bool)
    layer[tuple(outs.T)] = True
    gamma = layer & (slope <= gamma_tol)
    sigma = layer & ~gamma
    return BoundaryClassification(gamma, sigma, float(gamma_tol), slope)


def _rescale_about_barycenter(support: Support, t: float) -> tuple[Support, bool]:
    c = support.barycenter()
    return transform_support(support, t, c - t * c)


def check_scaling(support: Support, t: float, objective: Objective = Objective.BUCKLING, tol: float = 0.05) -> dict:
    """
    Compare ``t^2 Lambda(tS)`` with ``Lambda(S)``, scaling about the barycenter.

    Raises
    ------
    GridError
        If ``t <= 0`` or the scaled support leaves the container.
    """
    if not t > 0:
        raise GridError(f"scale must be > 0, got {t}")
    scaled, clipped = _rescale_about_barycenter(support, t)
    if clipped:
        raise GridError(f"support scaled by {t} leaves the container")
    lam = min_eigenpair(support, objective).lam
    lam_t = lam if t == 1 else min_eigenpair(scaled, objective).lam
    err = abs(t * t * lam_t / lam - 1.0)
    return dict(t=t, lam=lam, lam_scaled=lam_t, ratio_error=err, tol=tol, passed=err <= tol)


def check_translation(support: Support, shift: Sequence[float], tol: Optional[float] = None) -> dict:
    """
    Compare ``Lambda(S)`` with ``Lambda(S + shift)``.

    Lattice-aligned shifts give a permuted copy of the same pencil and default
    to ``tol = 1e-9``; other shifts re-rasterize and default to 0.05.
    """
    grid = support.grid
    shift = np.asarray(shift, dtype=float)
    steps = shift / grid.spacing
    lattice = bool(np.allclose(steps, np.rint(steps), rtol=0, atol=1e-9))
    if lattice:
        shift = np.rint(steps) * grid.spacing
    if tol is None:
        tol = 1e-9 if lattice else 0.05
    moved, clipped = transform_support(support, 1.0, shift)
    if clipped:
        raise GridError(f"support shifted by {shift.tolist()} leaves the container")
    lam = min_eigenpair(support).lam
    lam_s = lam if not np.any(shift) else min_eigenpair(moved).lam
    err = abs(lam / lam_s - 1.0)
    return dict(shift=shift.tolist(), lattice=lattice, lam=lam, lam_shifted=lam_s, error=err, tol=tol, passed=err <= tol)


def check_al(support: Support, eig: EigenResult, c_n: Optional[float] = None, slack: float = 0.02) -> dict:
    """``Lambda(S) >= (1 - slack) c_n Lambda(S#)`` with ``S#`` the ball of equal volume."""
    n = support.grid.dim
    c = al_constant(n) if c_n is None else float(c_n)
    ball = ball_buckling_load(n, support.volume)
    bound = c * ball
    return dict(
        lam=eig.lam, c_n=c, lam_ball=ball, bound=bound, ratio=eig.lam / ball,
        slack=slack, passed=bool(eig.lam >= (1.0 - slack) * bound),
    )


def nested_pairs(support: Support, count: int, rng: np.random.Generator, drop: float = 0.3) -> list[tuple[Support, Support]]:
    """
    Random pairs ``S1 ⊂ S2 ⊆ support``: ``S2`` drops a random share of
    ``support``'s nodes and ``S1`` drops a further share of ``S2``'s.
    """
    pairs = []
    for _ in range(count):
        keep2 = support.active & (rng.random(support.grid.shape) >= drop * rng.random())
        keep1 = keep2 & (rng.random(support.grid.shape) >= drop * rng.random())
        if not keep1.any():
            keep1 = keep2.copy()
        pairs.append((Support(support.grid, keep1), Support(support.grid, keep2)))
    return pairs


def check_monotonicity(pairs, tol: float = 1e-8, objective: Objective = Objective.BUCKLING) -> list[dict]:
    """For each nested pair, ``Lambda(S1) + 2 tol * Lambda(S2) >= Lambda(S2)``."""
    out = []
    for small, big in pairs:
        if not small.issubset(big):
            raise DiagnosticsError("pair is not nested")
        l1 = min_eigenpair(small, objective, tol=tol).lam
        l2 = min_eigenpair(big, objective, tol=tol).lam
        out.append(dict(small=small.count, big=big.count, lam_small=l1, lam_big=l2,
                        passed=bool(l1 + 2 * tol * abs(l2) >= l2)))
    return out


# -- profiles ---------------------------------------------------------------


@dataclass
class Profile:
    """Per-radius values of a boundary profile; ``radii`` in physical units."""

    name: str
    radii: list
    values: list
    summary: float
    applicable: bool = True
    extra: dict = field(default_factory=dict)


def default_radius(support: Support) -> float:
    """``min(8h, diameter / 4)``, the upper radius of the profiles."""
    return min(8 * support.grid.spacing, 0.25 * support.diameter_bound())


def _radii(h: float, r0: float) -> list[float]:
    if r0 < 2 * h * (1 - 1e-12):
        raise DiagnosticsError(f"R0 = {r0} is below 2h = {2 * h}")
    radii, r = [], 2 * h
    while r <= r0 * (1 + 1e-12):
        radii.append(r)
        r *= 2
    return radii


def _faces(support: Support, classification: Optional[BoundaryClassification]):
    ins, outs = boundary_faces(support)
    if classification is not None and len(outs):
        keep = classification.gamma[tuple(outs.T)]
        ins, outs = ins[keep], outs[keep]
    return ins, outs


def _ball_offsets(dim: int, r_cells: float, direction: np.ndarray) -> np.ndarray:
    """Integer offsets ``p`` (relative to the inner node) with ``|p - direction/2| <= r_cells``."""
    m = int(math.ceil(r_cells)) + 1
    grid = np.indices((2 * m + 1,) * dim).reshape(dim, -1).T - m
    d = grid - 0.5 * direction
    return grid[np.einsum("ij,ij->i", d, d) <= r_cells * r_cells + 1e-9]


def _ball_reduce(values: np.ndarray, ins: np.ndarray, outs: np.ndarray, radius_cells: float, op) -> np.ndarray:
    """Apply ``op`` ('sum' or 'max') of ``values`` over each face-centered ball."""
    dim = values.ndim
    pad = int(math.ceil(radius_cells)) + 2
    padded = np.pad(values, pad)
    out = np.empty(len(ins))
    dirs = outs - ins
    for key in {tuple(d) for d in dirs}:
        sel = np.all(dirs == key, axis=1)
        off = _ball_offsets(dim, radius_cells, np.asarray(key))
        idx = ins[sel][:, None, :] + off[None, :, :] + pad
        vals = padded[tuple(np.moveaxis(idx, -1, 0))]
        out[sel] = vals.sum(axis=1) if op == "sum" else vals.max(axis=1)
    return out


def doubling_profile(
    support: Support, r0: Optional[float] = None, classification: Optional[BoundaryClassification] = None
) -> Profile:
    """
    Empirical doubling constant: for each ``R`` in ``2h, 4h, ... <= R0`` the
    largest ``|B_2R(x0) ∩ S| / |B_R(x0) ∩ S|`` over boundary points ``x0``.
    """
    h = support.grid.spacing
    r0 = default_radius(support) if r0 is None else r0
    ins, outs = _faces(support, classification)
    if support.count == 0 or len(ins) == 0:
        return Profile("doubling", [], [], math.nan, applicable=False)
    try:
        radii = _radii(h, r0)
    except DiagnosticsError:
        return Profile("doubling", [], [], math.nan, applicable=False)
    act = support.active.astype(float)
    vals = []
    for r in radii:
        small = _ball_reduce(act, ins, outs, r / h, "sum")
        big = _ball_reduce(act, ins, outs, 2 * r / h, "sum")
        vals.append(float(np.max(big / small)))
    return Profile("doubling", radii, vals, max(vals))


def nondegeneracy_profile(
    eig: EigenResult, support: Support, classification: Optional[BoundaryClassification] = None, r0: Optional[float] = None
) -> Profile:
    """
    ``c1(R) = min over free-boundary points of max_{B_R} |grad u| / R``.

    Raises
    ------
    DiagnosticsError
        If ``R0 < 2h`` or there are no free-boundary points.
    """
    h = support.grid.spacing
    r0 = default_radius(support) if r0 is None else r0
    radii = _radii(h, r0)
    if classification is None:
        classification = classify_boundary(eig, support)
    ins, outs = _faces(support, classification)
    if len(ins) == 0:
        raise DiagnosticsError("no free-boundary points")
    grad = gradient_magnitude(eig.field.restrict(support))
    vals = [float(np.min(_ball_reduce(grad, ins, outs, r / h, "max"))) / r for r in radii]
    return Profile("nondegeneracy", radii, vals, min(vals), extra=dict(depends_on=["eps", "n", "omega0", "sigma"]))


def density_profile(
    support: Support,
    classification: Optional[BoundaryClassification] = None,
    r0: Optional[float] = None,
    alpha: float = 0.5,
) -> Profile:
    """
    Minimum over boundary points of ``|S ∩ B_R| / |B_R|`` per radius, with
    the constant ``c2`` fitted to the shape ``c2 |B_R|^((1-alpha)/alpha)``.
    """
    if not 0 < alpha < 1:
        raise DiagnosticsError(f"alpha must lie in (0, 1), got {alpha}")
    h = support.grid.spacing
    r0 = default_radius(support) if r0 is None else r0
    radii = _radii(h, r0)
    ins, outs = _faces(support, classification)
    if len(ins) == 0:
        raise DiagnosticsError("no boundary points")
    act = support.active.astype(float)
    ones = np.ones(support.grid.shape)
    w = support.grid.cell_volume
    vals, fits = [], []
    for r in radii:
        full = float(_ball_reduce(ones, ins[:1], outs[:1], r / h, "sum")[0])
        q = float(np.min(_ball_reduce(act, ins, outs, r / h, "sum"))) / full
        vals.append(q)
        fits.append(q / (full * w) ** ((1 - alpha) / alpha))
    return Profile("density", radii, vals, min(vals), extra=dict(alpha=alpha, c2_fit=min(fits)))


# -- report -----------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    applicable: bool
    connectedness: Optional[dict] = None
    scaling_check: Optional[dict] = None
    translation_check: Optional[dict] = None
    monotonicity_check: Optional[list] = None
    al_check: Optional[dict] = None
    boundary: Optional[dict] = None
    doubling_profile: Optional[Profile] = None
    nondegeneracy_profile: Optional[Profile] = None
    density_profile: Optional[Profile] = None
    pde_residuals: Optional[PdeResidual] = None
    certificate: Optional[dict] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        return _jsonable(d)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def assemble_report(
    support: Support,
    eig: Optional[EigenResult] = None,
    *,
    certificate=None,
    c_n: Optional[float] = None,
    r0: Optional[float] = None,
    alpha: float = 0.5,
    monotonicity_pairs: int = 3,
    seed: int = 0,
    scale: float = 0.5,
) -> DiagnosticsReport:
    """
    Run every check on ``support`` (and its eigenpair, solved if missing).

    Sections that cannot run are left as ``None`` with a note explaining
    why; one failing section never stops the others.
    """
    notes = ["container may be a box; the theory is stated for a ball container"]
    cert = None
    if certificate is not None:
        cert = _jsonable(dict(asdict(certificate), label=certificate.label))
    if support.count == 0:
        notes.append("empty support: nothing to measure")
        return DiagnosticsReport(False, certificate=cert, notes=notes)

    comps = connected_components(support)
    report = DiagnosticsReport(True, certificate=cert, notes=notes)
    report.connectedness = dict(components=len(comps), passed=len(comps) == 1)
    if eig is None:
        eig = min_eigenpair(support)

    def attempt(name, fn):
        try:
            setattr(report, name, fn())
        except (GridError, DiagnosticsError, ArithmeticError) as exc:
            notes.append(f"{name}: not applicable ({exc})")

    h = support.grid.spacing
    attempt("scaling_check", lambda: check_scaling(support, scale))

    def translation():
        for shift in ([h] + [0.0] * (support.grid.dim - 1), [-h] + [0.0] * (support.grid.dim - 1)):
            try:
                return check_translation(support, shift)
            except GridError:
                continue
        raise GridError("no unit lattice shift fits in the container")

    attempt("translation_check", translation)
    rng = np.random.default_rng(seed)
    attempt("monotonicity_check", lambda: check_monotonicity(nested_pairs(support, monotonicity_pairs, rng)))
    if eig.objective is Objective.BUCKLING:
        report.al_check = check_al(support, eig, c_n)
    cls = classify_boundary(eig, support)
    report.boundary = dict(gamma=cls.n_gamma, sigma=cls.n_sigma, gamma_tol=cls.gamma_tol)
    rr = default_radius(support) if r0 is None else r0
    attempt("doubling_profile", lambda: doubling_profile(support, rr, cls))
    attempt("nondegeneracy_profile", lambda: nondegeneracy_profile(eig, support, cls, rr))
    attempt("density_profile", lambda: density_profile(support, cls, rr, alpha))
    report.pde_residuals = pde_residual(eig, support)
    if not report.pde_residuals.applicable:
        notes.append("pde_residuals: support too thin for a full interior stencil")
    return report
