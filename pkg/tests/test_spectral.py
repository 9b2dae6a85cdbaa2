import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from clampedplate import shapes
from clampedplate.grid import Ball, Box, Field, Support, build_grid, discrete_norms, make_shape, transform_support
from clampedplate.spectral import (
    EmptySupport,
    NonConvergence,
    Objective,
    min_eigenpair,
    pde_residual,
    pencil,
    rayleigh_quotient,
)
from clampedplate.theory import bessel_first_zero

from conftest import one_node

J11_SQ = bessel_first_zero(1.0) ** 2


def test_rayleigh_zero_is_infinite(grid2):
    assert rayleigh_quotient(grid2.zeros()) == math.inf
    assert rayleigh_quotient(grid2.zeros(), Objective.FUNDAMENTAL_TONE) == math.inf


def test_one_node_eigenpair(grid2):
    s = one_node(grid2)
    eig = min_eigenpair(s)
    h = grid2.spacing
    assert eig.lam == pytest.approx(5 / h**2, rel=1e-13)
    assert eig.normalization == pytest.approx(1.0, abs=1e-12)
    # unit Dirichlet energy on one node: 4 c^2 = 1
    assert eig.field.values[s.active][0] == pytest.approx(0.5)
    assert np.count_nonzero(eig.field.values) == 1


def test_one_node_fundamental_tone(grid2):
    eig = min_eigenpair(one_node(grid2), Objective.FUNDAMENTAL_TONE)
    assert eig.lam == pytest.approx(20 / grid2.spacing**4, rel=1e-12)


def test_empty_support_raises(grid2):
    with pytest.raises(EmptySupport):
        min_eigenpair(grid2.empty_support())


def test_pencil_matches_norms(disk_support):
    a, k, index = pencil(disk_support)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(len(index))
    v = np.zeros(disk_support.grid.shape)
    v.ravel()[index] = x
    d, l, m = discrete_norms(Field(disk_support.grid, v))
    assert x @ (a @ x) == pytest.approx(l, rel=1e-12)
    assert x @ (k @ x) == pytest.approx(d, rel=1e-12)
    _, k2, _ = pencil(disk_support, Objective.FUNDAMENTAL_TONE)
    assert x @ (k2 @ x) == pytest.approx(m, rel=1e-12)


def test_eigen_result_contract(disk_support):
    eig = min_eigenpair(disk_support)
    assert eig.residual <= 1e-8
    assert eig.normalization == pytest.approx(1.0, abs=1e-10)
    u = eig.field.values
    assert u.ravel()[np.argmax(np.abs(u))] > 0
    assert not u[~disk_support.active].any()
    assert rayleigh_quotient(eig.field) == pytest.approx(eig.lam, rel=1e-10)


def test_sparse_path_matches_dense_reference():
    g = build_grid(2, 64, Box(3.0))
    s = make_shape(g, shapes.Ball(tuple(g.center), 0.6))
    assert s.count > 400  # sparse shift-invert path
    a, k, _ = pencil(s)
    w = scipy.linalg.eigh(a.toarray(), k.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0]
    assert min_eigenpair(s).lam == pytest.approx(w, rel=1e-10)


def test_disk_approaches_bessel_value():
    g = build_grid(2, 64, Ball(1.0))
    lam = min_eigenpair(Support(g, g.mask)).lam
    assert lam < J11_SQ
    assert abs(lam / J11_SQ - 1) < 0.05


def test_fundamental_tone_positive(disk_support):
    eig = min_eigenpair(disk_support, Objective.FUNDAMENTAL_TONE)
    assert eig.lam > 0 and eig.residual <= 1e-8


def test_nested_monotonicity(disk_support):
    rng = np.random.default_rng(3)
    tol = 1e-8
    for _ in range(3):
        big = disk_support.active & (rng.random(disk_support.grid.shape) > 0.1)
        small = big & (rng.random(disk_support.grid.shape) > 0.1)
        l2 = min_eigenpair(Support(disk_support.grid, big), tol=tol).lam
        l1 = min_eigenpair(Support(disk_support.grid, small), tol=tol).lam
        assert l1 + 2 * tol * l2 >= l2


def test_lattice_translation_invariance(disk_support):
    h = disk_support.grid.spacing
    moved, _ = transform_support(disk_support, 1.0, np.array([2 * h, -h]))
    a = min_eigenpair(disk_support).lam
    b = min_eigenpair(moved).lam
    assert abs(a / b - 1) <= 1e-9


def test_reproducible(disk_support):
    a = min_eigenpair(disk_support)
    b = min_eigenpair(disk_support)
    assert a.lam == b.lam
    np.testing.assert_array_equal(a.field.values, b.field.values)


def test_nonconvergence_reported(disk_support):
    with pytest.raises(NonConvergence) as info:
        min_eigenpair(disk_support, tol=1e-30, max_iter=50)
    assert info.value.residual > 1e-30


def test_pde_residual_one_node_not_applicable(grid2):
    s = one_node(grid2)
    r = pde_residual(min_eigenpair(s), s)
    assert not r.applicable and r.interior_nodes == 0


def test_pde_residual_small_on_disk(disk_support):
    r = pde_residual(min_eigenpair(disk_support), disk_support)
    assert r.applicable and r.interior_nodes > 0
    assert r.relative_rms < 1e-6
    assert r.boundary_gradient_max > 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), c=st.sampled_from([-3.0, -0.5, 1e-3, 2.0, 1e3]))
def test_rayleigh_homogeneity(seed, c):
    g = build_grid(2, 16, Box(1.0))
    rng = np.random.default_rng(seed)
    v = np.where(g.mask & (rng.random(g.shape) < 0.5), rng.standard_normal(g.shape), 0.0)
    if not v.any():
        v[8, 8] = 1.0
    f = Field(g, v)
    for obj in Objective:
        r1 = rayleigh_quotient(f, obj)
        r2 = rayleigh_quotient(f * c, obj)
        assert abs(r2 / r1 - 1) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_random_supports_have_positive_load(seed):
    g = build_grid(2, 16, Box(1.0))
    rng = np.random.default_rng(seed)
    a = g.mask & (rng.random(g.shape) < 0.6)
    if not a.any():
        a[8, 8] = True
    eig = min_eigenpair(Support(g, a))
    assert eig.lam > 0 and eig.residual <= 1e-8
