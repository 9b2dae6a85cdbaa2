"""
Rayleigh quotients and the smallest eigenpair of the clamped-plate pencil.

On a support ``S`` the admissible fields are node vectors vanishing off
``S``. With ``L`` the full-array Laplacian and ``G`` the edge-difference
operator (both restricted to the columns of ``S``) the pencil is

    A = h^n L^T L,    K = h^n G^T G   (buckling)
                      K = h^n I       (fundamental tone)

so that ``u^T A u`` and ``u^T K u`` are exactly the discrete energies of
:func:`clampedplate.grid.discrete_norms`. ``A`` is never formed as a 13-point
stencil by hand; it is the sparse product of the two 5-point applications.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .grid import Field, Grid, Support, boundary_faces, discrete_norms, laplacian_apply

__all__ = [
    "Objective",
    "EigenResult",
    "PdeResidual",
    "NonConvergence",
    "EmptySupport",
    "rayleigh_quotient",
    "pencil",
    "min_eigenpair",
    "pde_residual",
]

DENSE_LIMIT = 400


class Objective(str, enum.Enum):
    BUCKLING = "buckling"
    FUNDAMENTAL_TONE = "fundamental_tone"


class NonConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float, msg: str = ""):
        super().__init__(msg or f"eigensolver did not converge: {iterations} iterations, residual {residual:.3e}")
        self.iterations = iterations
        self.residual = residual


class EmptySupport(ValueError):
    pass


def rayleigh_quotient(field: Field, objective: Objective = Objective.BUCKLING) -> float:
    """
    Discrete Rayleigh quotient; ``math.inf`` when the denominator vanishes.

    >>> from clampedplate.grid import build_grid, Box, Field
    >>> import numpy as np
    >>> g = build_grid(2, 8, Box(1.0))
    >>> v = np.zeros(g.shape); v[4, 4] = 3.0
    >>> rayleigh_quotient(Field(g, v)) * g.spacing**2
    5.0
    """
    dirichlet, lap, l2 = discrete_norms(field)
    den = dirichlet if Objective(objective) is Objective.BUCKLING else l2
    if den == 0.0:
        return math.inf
    return lap / den


def _lap1d(m: int, h: float) -> sp.csr_matrix:
    return sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(m, m), format="csr") / h**2


def _diff1d(m: int, h: float) -> sp.csr_matrix:
    # edges (i-1, i) for i = 0..m, the two end edges leave the array
    return sp.diags([-1.0, 1.0], [-1, 0], shape=(m + 1, m), format="csr") / h


@lru_cache(maxsize=8)
def _operators(grid: Grid) -> tuple[sp.csc_matrix, sp.csc_matrix]:
    m = grid.cells_per_side + 1
    eye = sp.identity(m, format="csr")
    lap = None
    grads = []
    for ax in range(grid.dim):
        lfac = [eye] * grid.dim
        gfac = [eye] * grid.dim
        lfac[ax] = _lap1d(m, grid.spacing)
        gfac[ax] = _diff1d(m, grid.spacing)
        lk, gk = lfac[0], gfac[0]
        for f, g in zip(lfac[1:], gfac[1:]):
            lk = sp.kron(lk, f, format="csr")
            gk = sp.kron(gk, g, format="csr")
        lap = lk if lap is None else lap + lk
        grads.append(gk)
    return lap.tocsc(), sp.vstack(grads).tocsc()


def pencil(support: Support, objective: Objective = Objective.BUCKLING):
    """
    Sparse matrices ``(A, K, index)`` of the pencil on ``support``.

    ``index`` holds the flat node indices of the degrees of freedom in the
    order used by the matrices.
    """
    grid = support.grid
    index = np.flatnonzero(support.active.ravel())
    lap, grad = _operators(grid)
    w = grid.cell_volume
    ls = lap[:, index]
    a = (ls.T @ ls) * w
    if Objective(objective) is Objective.BUCKLING:
        gs = grad[:, index]
        k = (gs.T @ gs) * w
    else:
        k = sp.identity(len(index), format="csc") * w
    return a.tocsc(), k.tocsc(), index


@dataclass(frozen=True, eq=False)
class EigenResult:
    lam: float
    field: Field
    residual: float
    iterations: int
    normalization: float
    objective: Objective = Objective.BUCKLING


def _initial_guess(support: Support, index: np.ndarray) -> np.ndarray:
    idx = np.argwhere(support.active)
    lo = idx.min(axis=0) - 1
    hi = idx.max(axis=0) + 1
    g = np.ones(len(idx))
    for ax in range(support.grid.dim):
        g *= (idx[:, ax] - lo[ax]) * (hi[ax] - idx[:, ax])
    # argwhere and flatnonzero both enumerate in C order, so g lines up with index
    return g.astype(float)


def _residual(a, k, lam: float, u: np.ndarray) -> float:
    # long double matvecs: the double-precision evaluation noise alone is
    # about 1e-8 for 2-D grids with N = 256
    al, kl, ul = a.astype(np.longdouble), k.astype(np.longdouble), u.astype(np.longdouble)
    ku = kl @ ul
    r = al @ ul - np.longdouble(lam) * ku
    return float(np.linalg.norm(r.astype(float)) / (abs(lam) * np.linalg.norm(ku.astype(float))))


def _rayleigh(a, k, u: np.ndarray) -> float:
    ul = u.astype(np.longdouble)
    return float((ul @ (a.astype(np.longdouble) @ ul)) / (ul @ (k.astype(np.longdouble) @ ul)))


def min_eigenpair(
    support: Support,
    objective: Objective = Objective.BUCKLING,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> EigenResult:
    """
    Smallest eigenpair of ``A u = lam K u`` on the support.

    The eigenvector is normalized to unit denominator energy and its
    largest-magnitude entry is made positive. ``residual`` is the relative
    pencil residual ``|A u - lam K u| / (lam |K u|)``.

    Raises
    ------
    EmptySupport
        If the support has no active node.
    NonConvergence
        If the residual does not reach ``tol`` within ``max_iter`` operator
        applications.
    """
    objective = Objective(objective)
    if support.count == 0:
        raise EmptySupport("eigenproblem on an empty support")
    a, k, index = pencil(support, objective)
    ndof = len(index)
    solves = 0

    if ndof <= DENSE_LIMIT:
        w, vecs = scipy.linalg.eigh(a.toarray(), k.toarray(), subset_by_index=[0, 0])
        lam, u = float(w[0]), vecs[:, 0]
        solves = 1
    else:
        lu = splu(a, permc_spec="MMD_AT_PLUS_A")

        def apply_inv(x):
            nonlocal solves
            solves += 1
            return lu.solve(np.asarray(x, dtype=float).ravel())

        op = LinearOperator((ndof, ndof), matvec=apply_inv, dtype=float)
        v0 = _initial_guess(support, index)
        try:
            w, vecs = eigsh(
                a, k=1, M=k, sigma=0.0, which="LM", OPinv=op, v0=v0,
                tol=min(tol * 1e-3, 1e-10), maxiter=max_iter, ncv=min(ndof - 1, 24),
            )
        except ArpackNoConvergence as exc:
            raise NonConvergence(solves, math.nan, str(exc)) from exc
        u = vecs[:, 0]
        lam = _rayleigh(a, k, u)
        res = _residual(a, k, lam, u)
        # polish by inverse iteration, refining each solve against a long
        # double residual; stop once the residual stops improving
        al = a.astype(np.longdouble)
        kl = k.astype(np.longdouble)
        best, stale = res, 0
        while res > tol and solves < max_iter and stale < 3:
            b = kl @ u.astype(np.longdouble)
            x = apply_inv(b.astype(float)).astype(np.longdouble)
            for _ in range(2):
                x = x + apply_inv((b - al @ x).astype(float))
            u = (x / np.sqrt(x @ (kl @ x))).astype(float)
            lam = _rayleigh(a, k, u)
            res = _residual(a, k, lam, u)
            if res < 0.5 * best:
                best, stale = res, 0
            else:
                stale += 1

    norm = float(u @ (k @ u))
    u = u / math.sqrt(norm)
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    lam = _rayleigh(a, k, u)
    res = _residual(a, k, lam, u)
    if not res <= tol:
        raise NonConvergence(solves, res)
    values = np.zeros(support.grid.shape)
    values.ravel()[index] = u
    fld = Field(support.grid, values)
    return EigenResult(lam, fld, res, solves, float(u @ (k @ u)), objective)


@dataclass(frozen=True)
class PdeResidual:
    applicable: bool
    interior_rms: float
    relative_rms: float
    boundary_gradient_max: float
    interior_nodes: int


def _diamond(dim: int, radius: int) -> np.ndarray:
    idx = np.indices((2 * radius + 1,) * dim) - radius
    return np.sum(np.abs(idx), axis=0) <= radius


def pde_residual(eig: EigenResult, support: Support) -> PdeResidual:
    """
    Residual of the Euler-Lagrange equation on the support.

    At active nodes whose whole 13-point (diamond of radius 2) stencil is
    active, evaluates ``lap(lap u) + lam lap u`` (buckling) or
    ``lap(lap u) - lam u`` (fundamental tone). The boundary term is the
    largest one-sided difference ``|u(a)| / h`` from an active node ``a`` into
    an inactive neighbor.
    """
    grid = support.grid
    u = eig.field.restrict(support)
    lap = laplacian_apply(u)
    bilap = laplacian_apply(Field(grid, np.where(grid.mask, lap, 0.0)))
    # the outer Laplacian only matters at interior nodes, where the mask cut is invisible
    if eig.objective is Objective.BUCKLING:
        r = bilap + eig.lam * lap
    else:
        r = bilap - eig.lam * u.values
    inner = ndimage.binary_erosion(support.active, structure=_diamond(grid.dim, 2), border_value=0)
    ins, _ = boundary_faces(support)
    bgrad = float(np.max(np.abs(u.values[tuple(ins.T)]), initial=0.0)) / grid.spacing

    m = int(inner.sum())
    if m == 0:
        return PdeResidual(False, math.nan, math.nan, bgrad, 0)
    rms = float(np.sqrt(np.mean(r[inner] ** 2)))
    scale = float(np.sqrt(np.mean(bilap[inner] ** 2)))
    return PdeResidual(True, rms, rms / scale if scale > 0 else math.nan, bgrad, m)
