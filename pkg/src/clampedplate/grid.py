"""
Uniform Cartesian discretization of the container and discrete calculus on it.

Nodes sit at ``i * h`` for ``i = 0..N`` along every axis. The container mask
marks nodes strictly inside the container; everything else (including the
outer ring of the node array) is held at zero. Admissible fields are
zero-extended, which is how the clamped condition ``u = |grad u| = 0`` is
realized: the Laplacian stencil reads the zeros outside the support.

The Laplacian is evaluated on the whole node array, not only on masked nodes,
so a field touching the last masked layer still pays for the jump into the
wall. Padding the array with further zeros changes none of the energies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union as _Union

import numpy as np
from scipy import ndimage
from scipy.special import gamma as _gamma

__all__ = [
    "Box",
    "Ball",
    "Grid",
    "Field",
    "Support",
    "GridError",
    "build_grid",
    "laplacian_apply",
    "gradient_magnitude",
    "discrete_norms",
    "support_of",
    "connected_components",
    "transform_support",
    "make_shape",
    "boundary_faces",
]

MAX_DIM = 4


class GridError(ValueError):
    """Invalid grid, field, support or shape."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned cube ``[0, side]^n``."""

    side: float

    def measure(self, dim: int) -> float:
        return float(self.side) ** dim


@dataclass(frozen=True)
class Ball:
    """Ball of the given radius, centered in its bounding box ``[0, 2r]^n``."""

    radius: float

    def measure(self, dim: int) -> float:
        return float(np.pi ** (dim / 2) / _gamma(dim / 2 + 1)) * float(self.radius) ** dim


Container = _Union[Box, Ball]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    dim: int
    cells_per_side: int
    spacing: float
    container: Container
    mask: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_side + 1,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def side(self) -> float:
        """Side length of the node array's bounding box."""
        return self.spacing * self.cells_per_side

    @property
    def center(self) -> np.ndarray:
        return np.full(self.dim, 0.5 * self.side)

    @property
    def container_measure(self) -> float:
        return self.container.measure(self.dim)

    def axes(self) -> list[np.ndarray]:
        return [np.arange(self.cells_per_side + 1) * self.spacing] * self.dim

    def coordinates(self) -> list[np.ndarray]:
        """Node coordinates as ``dim`` arrays of the grid shape."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def empty_support(self) -> "Support":
        return Support(self, np.zeros(self.shape, dtype=bool))


def build_grid(dim: int, cells_per_side: int, container: Container, *, max_dim: int = MAX_DIM) -> Grid:
    """
    Build the node grid and container mask.

    Parameters
    ----------
    dim : int
        Spatial dimension, at least 2.
    cells_per_side : int
        Number of cells ``N`` along each axis of the bounding box, at least 8.
    container : Box or Ball
        The container ``B``.
    max_dim : int
        Memory guard on the dimension.

    Examples
    --------
    >>> g = build_grid(2, 8, Box(1.0))
    >>> g.spacing, int(g.mask.sum())
    (0.125, 49)
    """
    if dim < 2:
        raise GridError(f"dimension must be >= 2, got {dim}")
    if dim > max_dim:
        raise GridError(f"dimension {dim} exceeds the memory guard max_dim={max_dim}")
    if cells_per_side < 8:
        raise GridError(f"cells_per_side must be >= 8, got {cells_per_side}")
    if isinstance(container, Box):
        extent = float(container.side)
    elif isinstance(container, Ball):
        extent = 2.0 * float(container.radius)
    else:
        raise GridError(f"unknown container {container!r}")
    if not np.isfinite(extent) or extent <= 0:
        raise GridError(f"container has zero measure: {container!r}")

    h = extent / cells_per_side
    shape = (cells_per_side + 1,) * dim
    if isinstance(container, Box):
        mask = np.zeros(shape, dtype=bool)
        mask[(slice(1, -1),) * dim] = True
    else:
        idx = np.indices(shape, dtype=float) * h - container.radius
        mask = np.sum(idx**2, axis=0) < container.radius**2
    if not mask.any():
        raise GridError("container mask is empty")
    return Grid(dim, cells_per_side, h, container, _frozen(mask))


@dataclass(frozen=True, eq=False)
class Field:
    """Node values of a zero-extended function on the container."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field has non-finite values")
        if np.any(v[~self.grid.mask] != 0.0):
            raise GridError("field is nonzero outside the container mask")
        object.__setattr__(self, "values", _frozen(v.copy()))

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def restrict(self, support: "Support") -> "Field":
        """Zero the field outside ``support``."""
        return Field(self.grid, np.where(support.active, self.values, 0.0))


@dataclass(frozen=True, eq=False)
class Support:
    """Set of active nodes; each node stands for the cell of side ``h`` around it."""

    grid: Grid
    active: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.active, dtype=bool)
        if a.shape != self.grid.shape:
            raise GridError(f"support shape {a.shape} does not match grid {self.grid.shape}")
        if np.any(a & ~self.grid.mask):
            raise GridError("support leaves the container mask")
        object.__setattr__(self, "active", _frozen(a.copy()))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.active))

    @property
    def volume(self) -> float:
        return self.count * self.grid.cell_volume

    def __len__(self) -> int:
        return self.count

    def __eq__(self, other) -> bool:
        if not isinstance(other, Support):
            return NotImplemented
        return self.grid is other.grid and np.array_equal(self.active, other.active)

    def __hash__(self):
        return hash((id(self.grid), self.active.tobytes()))

    def issubset(self, other: "Support") -> bool:
        return bool(np.all(other.active[self.active]))

    def barycenter(self) -> np.ndarray:
        if self.count == 0:
            raise GridError("empty support has no barycenter")
        idx = np.argwhere(self.active)
        return idx.mean(axis=0) * self.grid.spacing

    def diameter_bound(self) -> float:
        """Diagonal of the bounding box of the active cells."""
        if self.count == 0:
            return 0.0
        idx = np.argwhere(self.active)
        ext = (idx.max(axis=0) - idx.min(axis=0) + 1) * self.grid.spacing
        return float(np.linalg.norm(ext))


def _shifted(v: np.ndarray, axis: int, step: int) -> np.ndarray:
    """``v(x + step*e_axis)`` with zeros beyond the array."""
    out = np.zeros_like(v)
    src = [slice(None)] * v.ndim
    dst = [slice(None)] * v.ndim
    if step > 0:
        src[axis], dst[axis] = slice(step, None), slice(None, -step)
    else:
        src[axis], dst[axis] = slice(None, step), slice(-step, None)
    out[tuple(dst)] = v[tuple(src)]
    return out


def _values(f) -> tuple[Grid, np.ndarray]:
    if isinstance(f, Field):
        return f.grid, f.values
    raise TypeError(f"expected Field, got {type(f).__name__}")


def laplacian_apply(f: Field) -> np.ndarray:
    """
    Five-point (``2n+1``-point) Laplacian of the zero-extended field.

    Returned on the full node array; the ring of unmasked nodes around the
    container generally carries nonzero values.
    """
    grid, v = _values(f)
    out = -2.0 * grid.dim * v
    for ax in range(grid.dim):
        out = out + _shifted(v, ax, 1) + _shifted(v, ax, -1)
    return out / grid.spacing**2


def gradient_magnitude(f: Field) -> np.ndarray:
    """Central-difference gradient magnitude at every node."""
    grid, v = _values(f)
    acc = np.zeros_like(v)
    for ax in range(grid.dim):
        d = (_shifted(v, ax, 1) - _shifted(v, ax, -1)) / (2 * grid.spacing)
        acc += d * d
    return np.sqrt(acc)


def discrete_norms(f: Field) -> tuple[float, float, float]:
    """
    Return ``(dirichlet_energy, laplacian_energy, l2_energy)``.

    The Dirichlet energy sums squared forward differences over every edge of
    the node array (plus the edges leaving it, which only see zeros), each
    weighted by ``h^n``.
    """
    grid, v = _values(f)
    w = grid.cell_volume
    h = grid.spacing
    dirichlet = 0.0
    for ax in range(grid.dim):
        padded = np.pad(v, [(1, 1) if a == ax else (0, 0) for a in range(grid.dim)])
        d = np.diff(padded, axis=ax) / h
        dirichlet += float(np.sum(d * d))
    lap = laplacian_apply(f)
    return dirichlet * w, float(np.sum(lap * lap)) * w, float(np.sum(v * v)) * w


def support_of(f: Field, threshold: float | None = 0.0) -> Support:
    """
    Active set ``{|v| > threshold}``.

    ``threshold=None`` selects the relative default ``1e-8 * max|v|`` used
    inside the optimizer to filter eigensolver noise.
    """
    grid, v = _values(f)
    if threshold is None:
        threshold = 1e-8 * float(np.max(np.abs(v), initial=0.0))
    if threshold < 0:
        raise GridError(f"threshold must be >= 0, got {threshold}")
    return Support(grid, np.abs(v) > threshold)


def connected_components(support: Support) -> list[Support]:
    """Face-adjacent components, largest first (ties by first node in C order)."""
    if support.count == 0:
        return []
    structure = ndimage.generate_binary_structure(support.grid.dim, 1)
    labels, k = ndimage.label(support.active, structure=structure)
    counts = np.bincount(labels.ravel(), minlength=k + 1)[1:]
    # label numbers follow first appearance in C order, so a stable sort breaks ties
    order = np.argsort(-counts, kind="stable")
    return [Support(support.grid, labels == (i + 1)) for i in order]


def transform_support(
    support: Support, scale: float, translation: Sequence[float] | None = None
) -> tuple[Support, bool]:
    """
    Rasterize ``scale * S + translation`` on the same grid.

    A node ``p`` becomes active when the node nearest to
    ``(p - translation) / scale`` is active. The result is clipped to the
    container mask and the second return value tells whether clipping
    removed anything.
    """
    if not scale > 0:
        raise GridError(f"scale must be > 0, got {scale}")
    grid = support.grid
    h = grid.spacing
    shift = np.zeros(grid.dim) if translation is None else np.asarray(translation, dtype=float)
    if shift.shape != (grid.dim,):
        raise GridError(f"translation must have length {grid.dim}")
    out = np.zeros(grid.shape, dtype=bool)
    if support.count == 0:
        return Support(grid, out), False

    src = np.argwhere(support.active)
    lo_src, hi_src = src.min(axis=0) - 0.5, src.max(axis=0) + 0.5
    # lattice points whose pull-back can hit an active cell, possibly outside the array
    lo = np.floor((scale * lo_src * h + shift) / h).astype(int) - 1
    hi = np.ceil((scale * hi_src * h + shift) / h).astype(int) + 1
    ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, grid.dim)
    pre = np.rint((pts * h - shift) / (scale * h)).astype(int)
    n1 = grid.cells_per_side + 1
    inside = np.all((pre >= 0) & (pre < n1), axis=1)
    hit = np.zeros(len(pts), dtype=bool)
    hit[inside] = support.active[tuple(pre[inside].T)]
    pts = pts[hit]

    in_array = np.all((pts >= 0) & (pts < n1), axis=1)
    kept = pts[in_array]
    in_mask = grid.mask[tuple(kept.T)]
    out[tuple(kept[in_mask].T)] = True
    clipped = bool((~in_array).any() or (~in_mask).any())
    return Support(grid, out), clipped


def make_shape(grid: Grid, shape) -> Support:
    """
    Rasterize a shape from :mod:`clampedplate.shapes`: a node is active iff
    it lies in the shape.

    Raises
    ------
    GridError
        If the shape reaches outside the container mask.
    """
    pts = grid.coordinates()
    inside = np.asarray(shape.contains(pts), dtype=bool)
    if np.any(inside & ~grid.mask):
        raise GridError(f"{shape!r} exceeds the container")
    return Support(grid, inside)


def boundary_faces(support: Support) -> tuple[np.ndarray, np.ndarray]:
    """
    Faces of the rasterized set, i.e. pairs (active node, inactive face neighbor).

    Returns
    -------
    inner, outer : ndarray of int, shape (m, dim)
        Index arrays of the active node and its inactive neighbor. The face
        midpoint ``0.5 * (inner + outer) * h`` lies on the boundary of the
        union of active cells.
    """
    grid = support.grid
    a = support.active
    inner, outer = [], []
    idx = np.argwhere(a)
    n1 = grid.cells_per_side + 1
    for ax in range(grid.dim):
        for step in (-1, 1):
            nb = idx.copy()
            nb[:, ax] += step
            ok = (nb[:, ax] >= 0) & (nb[:, ax] < n1)
            # neighbours beyond the array are never active; they are skipped
            # because masked nodes never sit on the array edge
            cand, nbv = idx[ok], nb[ok]
            off = ~a[tuple(nbv.T)]
            inner.append(cand[off])
            outer.append(nbv[off])
    if not inner:
        z = np.zeros((0, grid.dim), dtype=int)
        return z, z
    return np.concatenate(inner), np.concatenate(outer)
