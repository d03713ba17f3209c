import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fieldmax.asclt import (AscltTrajectory, asclt_average, expected_average_iid, harmonic, indicator_stream,
                            no_exceedance_prob_iid, prefix_max, trajectory, write_checkpoints)
from fieldmax.errors import DomainError
from fieldmax.fieldsim import sample_iid
from fieldmax.levels import level_schedule


def _brute_prefix_max(x, d=None):
    d = np.zeros_like(x) if d is None else d
    n1, n2 = x.shape
    out = np.empty_like(x)
    for a in range(n1):
        for b in range(n2):
            out[a, b] = max(x[i, j] - d[i, j] for i in range(a + 1) for j in range(b + 1))
    return out


def _brute_bits(x, sched):
    n1, n2 = x.shape
    bits = np.empty((n1, n2), bool)
    for a in range(n1):
        for b in range(n2):
            u = sched.levels((a + 1, b + 1))
            bits[a, b] = all(x[i, j] <= u[i, j] for i in range(a + 1) for j in range(b + 1))
    return bits


def _brute_average(bits, norm):
    n1, n2 = bits.shape
    s = sum(bits[a, b] / ((a + 1) * (b + 1)) for a in range(n1) for b in range(n2))
    if norm == "harmonic":
        return s / (sum(1 / k for k in range(1, n1 + 1)) * sum(1 / k for k in range(1, n2 + 1)))
    return s / (math.log(n1) * math.log(n2))


def test_prefix_max_examples():
    np.testing.assert_array_equal(prefix_max(np.array([[1.0, 3.0], [2.0, 0.0]])), [[1, 3], [2, 3]])
    row = np.array([[2.0, 1.0, 5.0, 4.0, 7.0]])
    np.testing.assert_array_equal(prefix_max(row), np.maximum.accumulate(row, axis=1))


def test_prefix_max_with_offsets():
    rng = np.random.default_rng(0)
    x, d = rng.standard_normal((5, 6)), rng.uniform(-0.5, 0.5, (5, 6))
    np.testing.assert_array_equal(prefix_max(x, d), _brute_prefix_max(x, d))
    with pytest.raises(DomainError):
        prefix_max(x, d[:4])


def test_indicator_trivial_fields():
    s = level_schedule((5, 5), 1.0)
    assert indicator_stream(np.full((5, 5), -10.0), s).all()
    x = np.zeros((5, 5))
    x[0, 0] = 10.0
    assert not indicator_stream(x, s).any()
    with pytest.raises(DomainError):
        indicator_stream(np.zeros((6, 5)), s)


def test_indicator_random_six_by_six():
    x = sample_iid((6, 6), 42).values
    s = level_schedule((6, 6), 1.0)
    np.testing.assert_array_equal(indicator_stream(x, s), _brute_bits(x, s))


def test_indicator_with_offsets_matches_brute_force():
    rng = np.random.default_rng(3)
    d = rng.uniform(-0.2, 0.2, (6, 7))
    s = level_schedule((6, 7), 1.0, d)
    for seed in range(10):
        x = sample_iid((6, 7), seed).values
        np.testing.assert_array_equal(indicator_stream(x, s), _brute_bits(x, s))


def test_average_examples():
    ones = np.ones((10, 10), bool)
    assert asclt_average(ones, normalization="harmonic") == pytest.approx(1.0, abs=1e-14)
    h10 = 2.9289682539682538
    assert harmonic(10) == pytest.approx(h10, rel=1e-15)
    assert asclt_average(ones, normalization="paper_log") == pytest.approx((h10 / math.log(10)) ** 2, rel=1e-13)
    assert asclt_average(ones, normalization="paper_log") == pytest.approx(1.6181, abs=1e-4)
    assert asclt_average(np.zeros((10, 10), bool), normalization="harmonic") == 0.0
    with pytest.raises(DomainError):
        asclt_average(np.ones((2, 5), bool), normalization="paper_log")
    with pytest.raises(DomainError):
        asclt_average(ones, normalization="other")


def test_trajectory_matches_brute_force():
    rng = np.random.default_rng(9)
    bits = rng.random((9, 7)) < 0.6
    t = AscltTrajectory.from_bits(bits)
    for k in [(3, 3), (9, 7), (5, 4), (1, 1)]:
        assert t.average(k, "harmonic") == pytest.approx(_brute_average(bits[: k[0], : k[1]], "harmonic"), rel=1e-13)
    assert t.average((9, 7), "paper_log") == pytest.approx(_brute_average(bits, "paper_log"), rel=1e-13)
    grid = t.averages("paper_log")
    assert np.isnan(grid[1, 5]) and np.isnan(grid[5, 0])
    assert grid[4, 3] == pytest.approx(t.average((5, 4), "paper_log"), rel=1e-14)
    with pytest.raises(DomainError):
        t.average((10, 7))


def test_trajectory_csv(tmp_path):
    s = level_schedule((4, 3), 1.0)
    t = trajectory(sample_iid((4, 3), 1), s)
    p = tmp_path / "t.csv"
    t.to_csv(p)
    rows = p.read_text().splitlines()
    assert rows[0] == "k1,k2,bit,weight,partial_sum" and len(rows) == 13
    last = rows[-1].split(",")
    assert last[:2] == ["4", "3"] and float(last[4]) == t.partial[-1, -1]
    q = tmp_path / "c.csv"
    write_checkpoints(q, t, [(3, 3), (4, 3)])
    assert q.read_text().splitlines()[0] == "n1,n2,normalization,A_n"


def test_expected_average_iid_oracle():
    # direct sum with log1p-free evaluation of Phi(u)^N
    from scipy.stats import norm
    n, tau = (20, 15), 1.0
    s = 0.0
    for k1 in range(1, n[0] + 1):
        for k2 in range(1, n[1] + 1):
            N = k1 * k2
            p = min(max(1 - tau / N, 1e-12), 1 - 1e-12)
            s += norm.cdf(norm.ppf(p)) ** N / N
    ref = s / (harmonic(20) * harmonic(15))
    assert expected_average_iid(n, tau, "harmonic") == pytest.approx(ref, rel=1e-9)


def test_expected_average_iid_examples():
    assert expected_average_iid((30, 30), 0.0, "harmonic") == pytest.approx(1.0, abs=1e-9)
    v = expected_average_iid((100, 100), 1.0, "harmonic")
    assert 0 < v < 1
    term = math.exp(1e4 * math.log1p(-1e-4))
    assert term == pytest.approx(0.367861, abs=1e-6)
    with pytest.raises(DomainError):
        expected_average_iid((4, 4), -1.0)


def test_no_exceedance_prob():
    assert no_exceedance_prob_iid((10, 10), 0.0) == 1.0
    assert no_exceedance_prob_iid((100, 100), 1.0) == pytest.approx(0.367861, abs=1e-6)
    assert abs(no_exceedance_prob_iid((1000, 1000), 1.0) - math.exp(-1)) < 2e-7
    assert no_exceedance_prob_iid((100, 100), 2.0) == pytest.approx(math.exp(-2), abs=2e-4)
    assert no_exceedance_prob_iid((2, 2), 5.0) == 0.0


def test_no_exceedance_matches_monte_carlo():
    # empirical frequency of {max <= u} on i.i.d. 20x20 fields
    s = level_schedule((20, 20), 1.0)
    from fieldmax.fieldsim import replication_seed
    reps = 3000
    hits = sum(indicator_stream(sample_iid((20, 20), replication_seed(4, r)).values, s)[-1, -1] for r in range(reps))
    p = no_exceedance_prob_iid((20, 20), 1.0)
    assert abs(hits / reps - p) <= 4 * math.sqrt(p * (1 - p) / reps)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 7), st.integers(1, 7)),
              elements=st.floats(-5, 5, allow_nan=False)))
def test_prefix_max_property(x):
    np.testing.assert_array_equal(prefix_max(x), _brute_prefix_max(x))


@settings(max_examples=60, deadline=None)
@given(arrays(np.bool_, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_harmonic_average_in_unit_interval(bits):
    v = asclt_average(bits, normalization="harmonic")
    assert 0.0 <= v <= 1.0 + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(2, 9), st.integers(2, 9))
def test_bits_monotone_under_lower_field(seed, n1, n2):
    # lowering every value can only turn bits on
    x = sample_iid((n1, n2), seed).values
    s = level_schedule((n1, n2), 1.0)
    assert np.all(indicator_stream(x - 0.5, s) >= indicator_stream(x, s))
