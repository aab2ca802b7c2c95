"""Distance oracles: the cumulative/quantile formulas against independent
transport solutions (greedy monotone matching, a true LP, and scipy)."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize, stats

from mfbd import (Distribution, EmpiricalMeasure, SizeMismatch, SupportTooLarge,
                  product_w1_upper, w1, w1_lp_oracle, wp, wp_lp_oracle)


def lp_transport_cost(mu, nu, p):
    """Full linear program over couplings; independent of the package code."""
    n = max(mu.cap, nu.cap) + 1
    a = mu.padded(n - 1).mass
    b = nu.padded(n - 1).mass
    cost = np.abs(np.subtract.outer(np.arange(n), np.arange(n))).astype(float) ** p
    A_eq = []
    for i in range(n):
        row = np.zeros((n, n))
        row[i, :] = 1.0
        A_eq.append(row.ravel())
    for j in range(n):
        col = np.zeros((n, n))
        col[:, j] = 1.0
        A_eq.append(col.ravel())
    res = optimize.linprog(cost.ravel(), A_eq=np.array(A_eq),
                           b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun ** (1.0 / p)


def random_pair(rng, cap):
    m1 = rng.random(cap + 1) ** 3
    m2 = rng.random(cap + 1) ** 3
    return Distribution(m1 / m1.sum()), Distribution(m2 / m2.sum())


def test_point_masses():
    assert w1(Distribution.dirac(3, 8), Distribution.dirac(7, 8)) == 4.0
    for p in (1.0, 2.0, 3.5):
        assert wp(Distribution.dirac(3, 8), Distribution.dirac(7, 8), p) == pytest.approx(4.0)


def test_identity():
    d = Distribution.poisson(2.5, 30)
    assert w1(d, d) == 0.0
    assert wp(d, d, 2.0) == 0.0


def test_mixture_against_full_lp():
    mu = Distribution.from_masses([0.5, 0.0, 0.5])
    nu = Distribution.dirac(1, 2)
    for p in (1.0, 2.0):
        expected = lp_transport_cost(mu, nu, p)
        assert expected == pytest.approx(1.0, abs=1e-9)
        assert wp(mu, nu, p) == pytest.approx(1.0, abs=1e-12)
    assert w1(mu, nu) == pytest.approx(1.0, abs=1e-12)


def test_uniform_shift():
    mu = Distribution.from_masses([0.25] * 4)
    nu = Distribution.from_masses([0.0, 0.25, 0.25, 0.25, 0.25])
    assert w1_lp_oracle(mu, nu) == pytest.approx(1.0, abs=1e-12)
    assert w1(mu, nu) == pytest.approx(1.0, abs=1e-12)


def test_oracle_against_full_lp_small_supports():
    rng = np.random.default_rng(5)
    for _ in range(12):
        mu, nu = random_pair(rng, 5)
        for p in (1.0, 2.0):
            assert wp_lp_oracle(mu, nu, p) == pytest.approx(
                lp_transport_cost(mu, nu, p), abs=1e-7)


def test_w1_against_scipy():
    rng = np.random.default_rng(11)
    for _ in range(40):
        mu, nu = random_pair(rng, 25)
        ref = stats.wasserstein_distance(np.arange(26), np.arange(26), mu.mass, nu.mass)
        assert w1(mu, nu) == pytest.approx(ref, abs=1e-10)


def test_quantile_formula_matches_oracle_1000_pairs():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        cap = int(rng.integers(1, 32))
        mu, nu = random_pair(rng, cap)
        assert abs(w1(mu, nu) - w1_lp_oracle(mu, nu)) <= 1e-12
        assert abs(wp(mu, nu, 2.0) - wp_lp_oracle(mu, nu, 2.0)) <= 1e-12


def test_w1_wp_consistency_at_p1():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        mu, nu = random_pair(rng, int(rng.integers(1, 40)))
        assert abs(wp(mu, nu, 1.0) - w1(mu, nu)) <= 1e-12


def test_support_guard():
    mu = Distribution.from_masses(np.ones(80) / 80)
    with pytest.raises(SupportTooLarge):
        w1_lp_oracle(mu, mu)


@st.composite
def small_distribution(draw):
    vals = draw(st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=1, max_size=12))
    m = np.asarray(vals)
    return Distribution(m / m.sum())


@settings(max_examples=120, deadline=None)
@given(small_distribution(), small_distribution(), small_distribution())
def test_metric_axioms(a, b, c):
    d_ab, d_ba = w1(a, b), w1(b, a)
    assert d_ab == pytest.approx(d_ba, abs=1e-10)
    assert d_ab >= -1e-12
    assert w1(a, c) <= d_ab + w1(b, c) + 1e-10
    if d_ab <= 1e-13:
        assert np.allclose(a.padded(max(a.cap, b.cap)).mass,
                           b.padded(max(a.cap, b.cap)).mass, atol=1e-9)
    # same axioms for the quadratic-cost distance
    q_ab = wp(a, b, 2.0)
    assert q_ab == pytest.approx(wp(b, a, 2.0), abs=1e-10)
    assert wp(a, c, 2.0) <= q_ab + wp(b, c, 2.0) + 1e-10


@settings(max_examples=80, deadline=None)
@given(small_distribution(), small_distribution())
def test_wp_monotone_in_p(a, b):
    values = [wp(a, b, p) for p in (1.0, 1.5, 2.0, 3.0)]
    for lo, hi in zip(values, values[1:]):
        assert lo <= hi + 1e-10


def test_product_w1_upper():
    a = np.array([[0, 1, 2], [3, 4, 5]])
    assert product_w1_upper(a, a) == 0.0
    assert product_w1_upper(a, a + 1) == pytest.approx(3.0)
    with pytest.raises(SizeMismatch):
        product_w1_upper(a, a[:1])
    rng = np.random.default_rng(8)
    xs = rng.integers(0, 6, size=(40, 4))
    ys = rng.integers(0, 6, size=(40, 4))
    ca = np.bincount(xs[:, 0], minlength=6) / 40
    cb = np.bincount(ys[:, 0], minlength=6) / 40
    marginal = w1(Distribution(ca), Distribution(cb))
    assert marginal <= product_w1_upper(xs, ys) + 1e-12


def test_truncation_error_bar():
    from mfbd.metrics import truncation_error_bar
    mu = Distribution(np.array([0.5, 0.5]), tail_mass=1e-10)
    nu = Distribution.dirac(1, 8)
    assert truncation_error_bar(mu, nu) == pytest.approx(8e-10)


def test_empirical_measure():
    emp = EmpiricalMeasure(np.array([3, 1, 1, 2]))
    d = emp.distribution()
    assert d.mass[1] == pytest.approx(0.5)
    assert d.mass[3] == pytest.approx(0.25)
    assert emp.mean() == pytest.approx(1.75)
    assert w1(emp.distribution(), EmpiricalMeasure(np.array([1, 1, 2, 3])).distribution()) == 0.0
