import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from fieldmax.errors import DomainError
from fieldmax.levels import (asymptotic_level, boundary_level, export_schedule_summary, lambda_bound_report,
                             lambda_min, level_schedule, load_offsets, save_offsets)


def _tail(x):
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _quantile_upper(q):
    # x with P(X > x) = q, by root finding on erfc
    return optimize.brentq(lambda x: _tail(x) - q, -10, 10, xtol=1e-14, rtol=1e-15)


def _checkerboard(n, a=0.1):
    i, j = np.indices(n)
    return np.where((i + j) % 2 == 0, a, -a)


def test_boundary_level_examples():
    assert boundary_level(1, 1, 0.5) == 0.0
    assert boundary_level(100, 100, 1) == pytest.approx(3.71902, abs=1e-5)
    assert boundary_level(100, 100, 1) == pytest.approx(_quantile_upper(1e-4), abs=1e-9)
    from fieldmax.kernels import std_normal_quantile
    assert boundary_level(10, 10, 0) == std_normal_quantile(1 - 1e-12)


def test_boundary_level_domain():
    with pytest.raises(DomainError):
        boundary_level(3, 3, -1)
    with pytest.raises(DomainError):
        boundary_level(0, 3, 1)


def test_asymptotic_level():
    assert asymptotic_level(100, 100) == pytest.approx(4.2919, abs=1e-4)
    assert math.sqrt(2 * math.log(math.e ** 2)) == pytest.approx(2.0)
    assert boundary_level(512, 512, 1) / asymptotic_level(512, 512) == pytest.approx(1.0, abs=0.15)
    with pytest.raises(DomainError):
        asymptotic_level(1, 1)


def test_constant_schedule_is_boundary_level():
    s = level_schedule((6, 5), 1.5)
    assert s.mode == "constant"
    for k1 in range(1, 7):
        for k2 in range(1, 6):
            assert s.base_level((k1, k2)) == boundary_level(k1, k2, 1.5)
    zero = level_schedule((6, 5), 1.5, np.zeros((6, 5)))
    np.testing.assert_array_equal(zero.base, s.base)
    np.testing.assert_array_equal(zero.levels((4, 3)), s.levels((4, 3)))


def test_mass_at_ten_by_ten():
    s = level_schedule((10, 10), 1.0)
    u = s.levels((10, 10))
    assert sum(_tail(x) for x in u.ravel()) == pytest.approx(1.0, abs=1e-9)


def test_checkerboard_offsets_recalibrate():
    d = _checkerboard((4, 4))
    s = level_schedule((4, 4), 1.0, d)
    assert s.mode == "offset"
    u = s.levels((4, 4))
    assert sum(_tail(x) for x in u.ravel()) == pytest.approx(1.0, abs=1e-6)
    # independent root solve of the same equation
    ref = optimize.brentq(lambda b: sum(_tail(b + x) for x in d.ravel()) - 1.0, -5, 5, xtol=1e-13)
    assert s.base_level((4, 4)) == pytest.approx(ref, abs=1e-9)
    assert s.base_level((4, 4)) != boundary_level(4, 4, 1.0)


def test_lambda_min():
    s = level_schedule((8, 8), 1.0)
    assert lambda_min(s) == s.base_level((8, 8))
    d = _checkerboard((8, 8))
    so = level_schedule((8, 8), 1.0, d)
    assert lambda_min(so) == pytest.approx(so.base_level((8, 8)) - 0.1, abs=1e-15)


def test_lambda_bound_at_hundred():
    rng = np.random.default_rng(1)
    d = rng.uniform(-0.1, 0.1, (100, 100))
    s = level_schedule((100, 100), 1.0, d)
    rep = lambda_bound_report(s)
    lam = lambda_min(s)
    assert rep.scaled_tail == pytest.approx(1e4 * _tail(lam), rel=1e-10)
    assert rep.scaled_tail <= rep.bound * (1 + 1e-9)
    # Mills-ratio form of the same bound
    w = float(d.max() - d.min())
    assert rep.scaled_tail <= math.exp(w * lam + w * w / 2) * (1 + w / lam)


def test_offset_bound_enforced():
    with pytest.raises(DomainError):
        level_schedule((3, 3), 1.0, np.full((3, 3), 2.0))
    with pytest.raises(DomainError):
        level_schedule((3, 3), 1.0, np.zeros((2, 3)))


def test_offsets_csv_round_trip(tmp_path):
    d = _checkerboard((3, 4))
    p = tmp_path / "d.csv"
    save_offsets(p, d)
    np.testing.assert_array_equal(load_offsets(p, shape=(3, 4)), d)
    p.write_text("i1,i2,delta\n2,2,0.05\n")
    got = load_offsets(p, shape=(3, 3))
    assert got[1, 1] == 0.05 and got.sum() == 0.05
    p.write_text("i1,i2,delta\n4,1,0.05\n")
    with pytest.raises(DomainError):
        load_offsets(p, shape=(3, 3))


def test_schedule_summary_csv(tmp_path):
    s = level_schedule((3, 2), 1.0)
    p = tmp_path / "s.csv"
    export_schedule_summary(p, s)
    lines = p.read_text().splitlines()
    assert lines[0] == "k1,k2,base_level,mass"
    assert len(lines) == 7


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 300), st.integers(2, 300), st.floats(0.01, 3.0))
def test_exactness_unclamped(n1, n2, tau):
    if tau < n1 * n2:
        u = boundary_level(n1, n2, tau)
        assert n1 * n2 * _tail(u) == pytest.approx(tau, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 200), st.floats(0.1, 1.0), st.floats(0.1, 1.0))
def test_monotone_in_tau_and_size(n, t1, t2):
    if abs(t1 - t2) > 1e-6:
        lo, hi = sorted((t1, t2))
        assert boundary_level(n, n, lo) > boundary_level(n, n, hi)
    assert boundary_level(n + 1, n, t1) > boundary_level(n, n, t1)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.floats(0.2, 1.5), st.integers(0, 2 ** 31))
def test_schedule_mass_conservation(n1, n2, tau, seed):
    d = np.random.default_rng(seed).uniform(-0.3, 0.3, (n1, n2))
    s = level_schedule((n1, n2), tau, d)
    from fieldmax.conditions import dyadic_probe
    for k in dyadic_probe((n1, n2)):
        if k[0] * k[1] > tau * (1 + 1e-9):
            u = s.levels(k)
            assert sum(_tail(x) for x in u.ravel()) == pytest.approx(tau, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.integers(2, 10), st.floats(0.2, 2.0), st.integers(0, 2 ** 31))
def test_levels_nondecreasing_in_k(n1, n2, tau, seed):
    # u_{l,i} >= u_{k,i} whenever l >= k, with and without offsets
    d = np.random.default_rng(seed).uniform(-0.5, 0.5, (n1, n2))
    for s in (level_schedule((n1, n2), tau), level_schedule((n1, n2), tau, d)):
        assert np.all(np.diff(s.base, axis=0) >= -1e-12)
        assert np.all(np.diff(s.base, axis=1) >= -1e-12)
