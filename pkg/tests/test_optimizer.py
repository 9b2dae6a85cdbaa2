import math

import numpy as np
import pytest

from clampedplate import shapes
from clampedplate.grid import Ball, Box, Support, build_grid, connected_components, make_shape
from clampedplate.optimizer import (
    CertificateRecord,
    ConfigError,
    OptimizeConfig,
    OptimizeResult,
    Strategy,
    certify_result,
    dichotomy_clipping,
    minimize_penalized,
    threshold_ladder,
    worker_count,
)
from clampedplate.spectral import min_eigenpair
from clampedplate.theory import PenaltyParams, penalty, thresholds

W0 = math.pi


def cfg(kind="non_rewarding", factor=0.9, n=48, **kw):
    thr = thresholds(2, W0, 1.0)
    eps = factor * (thr.eps1 if kind == "non_rewarding" else thr.eps0)
    return OptimizeConfig(2, n, Box(3.0), PenaltyParams(kind, eps, W0), **kw)


@pytest.fixture(scope="module")
def nr_result():
    return minimize_penalized(cfg())


def test_ladder():
    lad = threshold_ladder(8)
    assert len(lad) == 8 and lad[0] == 0.0 and lad[1] == 0.5
    assert all(0 <= t <= 0.5 for t in lad)
    assert all(a > b for a, b in zip(lad[1:], lad[2:]))


@pytest.mark.parametrize("kw", [dict(sweep_size=3), dict(max_outer=0), dict(stall_limit=0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        cfg(**kw)


def test_omega0_must_fit_container():
    with pytest.raises(ConfigError, match="0.9"):
        OptimizeConfig(2, 32, Box(1.8), PenaltyParams("rewarding", 0.1, math.pi))


def test_result_invariants(nr_result):
    r = nr_result
    assert r.converged
    assert r.i_eps == pytest.approx(r.eig.lam + penalty(r.params, r.volume), abs=1e-10)
    vals = [row.I for row in r.history]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert r.history[0].iteration == 0
    assert r.volume == pytest.approx(r.support.volume)
    assert len(connected_components(r.support)) == 1


def test_nonrewarding_volume_near_target(nr_result):
    assert abs(nr_result.volume - W0) / W0 <= 0.02
    thr = thresholds(2, W0, nr_result.params.eps)
    assert certify_result(nr_result, thr, nr_result.params).label == "PASS"


def test_optimum_beats_initial_ball(nr_result):
    assert nr_result.i_eps <= nr_result.history[0].I


def test_deterministic():
    a = minimize_penalized(cfg(n=32))
    b = minimize_penalized(cfg(n=32))
    np.testing.assert_array_equal(a.support.active, b.support.active)
    assert a.eig.lam == b.eig.lam
    assert [r.I for r in a.history] == [r.I for r in b.history]


def test_thread_count_does_not_change_result(monkeypatch):
    monkeypatch.setenv("PLATE_THREADS", "1")
    a = minimize_penalized(cfg(n=32))
    monkeypatch.setenv("PLATE_THREADS", "4")
    b = minimize_penalized(cfg(n=32))
    np.testing.assert_array_equal(a.support.active, b.support.active)
    assert a.eig.lam == b.eig.lam


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("PLATE_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("PLATE_THREADS", "0")
    with pytest.raises(ConfigError):
        worker_count()
    monkeypatch.delenv("PLATE_THREADS")
    assert worker_count() >= 1


def test_max_outer_exhaustion_reports_not_converged():
    r = minimize_penalized(cfg(n=32, max_outer=1, init_volume_factor=2.0))
    assert not r.converged and r.stop_reason == "max_outer reached"


def test_full_container_init():
    r = minimize_penalized(cfg(n=32, init="full_container"))
    assert r.converged
    assert abs(r.volume - W0) / W0 <= 0.05


def test_relaxed_descent_runs():
    r = minimize_penalized(cfg(n=32, strategy="relaxed_descent", relaxed_iters=20))
    assert r.converged and r.support.count > 0
    vals = [row.I for row in r.history]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_fundamental_tone_objective():
    r = minimize_penalized(cfg(n=32, objective="fundamental_tone"))
    assert r.converged and r.eig.lam > 0


def test_dichotomy_clipping():
    g = build_grid(2, 32, Box(3.0))
    small = make_shape(g, shapes.Ball(tuple(g.center), 0.5))
    assert not dichotomy_clipping(small, math.pi)
    assert dichotomy_clipping(small, 0.9 * 9.0 * 1.3)
    assert not dichotomy_clipping(g.empty_support(), math.pi)


def _fake(volume_support, params, clip):
    eig = min_eigenpair(volume_support)
    return OptimizeResult(volume_support, eig, eig.lam, volume_support.volume, [], True, clip, params)


@pytest.fixture(scope="module")
def disk():
    g = build_grid(2, 64, Box(3.0))
    return make_shape(g, shapes.ball_of_volume(tuple(g.center), math.pi))


def test_certificate_nonrewarding_fail_and_na(disk):
    thr = thresholds(2, W0, 1.0)
    p = PenaltyParams("non_rewarding", 0.9 * thr.eps1, disk.volume / 0.9)
    t = thresholds(2, p.omega0, p.eps)
    rec = certify_result(_fake(disk, p, False), t, p)
    assert rec.label == "FAIL"
    p2 = PenaltyParams("non_rewarding", 2 * thresholds(2, disk.volume, 1.0).eps1, disk.volume)
    rec2 = certify_result(_fake(disk, p2, False), thresholds(2, p2.omega0, p2.eps), p2)
    assert rec2.label == "N/A" and rec2.passed is None


def test_certificate_rewarding_cases(disk):
    v = disk.volume
    # volume 0.9 omega0: inside the bracket but below omega0
    w0 = v / 0.9
    thr = thresholds(2, w0, 1.0)
    p = PenaltyParams("rewarding", 0.5 * thr.eps0, w0)
    t = thresholds(2, w0, p.eps)
    assert t.alpha0 * w0 < v
    no_clip = certify_result(_fake(disk, p, False), t, p)
    assert no_clip.label == "FAIL" and no_clip.details["dichotomy_violation"]
    clip = certify_result(_fake(disk, p, True), t, p)
    assert clip.label == "PASS" and clip.details["case"] == "b"
    # exact volume: case a
    p2 = PenaltyParams("rewarding", 0.5 * thresholds(2, v, 1.0).eps0, v)
    rec = certify_result(_fake(disk, p2, False), thresholds(2, v, p2.eps), p2)
    assert rec.label == "PASS" and rec.details["case"] == "a"


def test_certificate_tight_tolerance(disk):
    # volume 0.995 omega0 passes the default 2% band and fails a 0.1% band
    w0 = disk.volume / 0.995
    p = PenaltyParams("non_rewarding", 0.9 * thresholds(2, w0, 1.0).eps1, w0)
    t = thresholds(2, w0, p.eps)
    r = _fake(disk, p, False)
    assert certify_result(r, t, p).label == "PASS"
    assert certify_result(r, t, p, tol_vol=1e-3 * w0).label == "FAIL"


def test_certificate_param_mismatch(disk):
    p = PenaltyParams("non_rewarding", 0.1, disk.volume)
    with pytest.raises(ValueError):
        certify_result(_fake(disk, p, False), thresholds(2, p.omega0, 0.1), PenaltyParams("rewarding", 0.1, disk.volume))
