import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfbd import Distribution, tv_distance


def test_dirac_basics():
    d = Distribution.dirac(3, 5)
    assert d.cap == 5
    assert d.mean() == 3.0
    assert d.moment(2) == 9.0
    assert d.mass[3] == 1.0


def test_mass_must_sum_to_one():
    with pytest.raises(ValueError):
        Distribution(np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        Distribution(np.array([1.5, -0.5]))


def test_poisson_truncation_matches_pmf():
    lam, cap = 2.0, 40
    d = Distribution.poisson(lam, cap)
    pmf = np.array([math.exp(-lam) * lam ** i / math.factorial(i) for i in range(cap + 1)])
    pmf /= pmf.sum()
    assert np.allclose(d.mass, pmf, atol=1e-15)
    assert abs(d.mean() - lam) < 1e-12


def test_geometric_mean():
    p = 0.5
    d = Distribution.geometric(p, 200)
    assert abs(d.mean() - (1 - p) / p) < 1e-9


def test_padding_preserves_measure():
    d = Distribution.dirac(2, 2).padded(10)
    assert d.cap == 10
    assert d.mean() == 2.0


def test_tv_distance():
    a = Distribution.dirac(0, 3)
    b = Distribution.dirac(2, 3)
    assert tv_distance(a, b) == 1.0
    assert tv_distance(a, a) == 0.0


def test_sampling_is_deterministic_and_in_range():
    d = Distribution.poisson(3.0, 30)
    rng1 = np.random.default_rng(7)
    rng2 = np.random.default_rng(7)
    s1, s2 = d.sample(rng1, 500), d.sample(rng2, 500)
    assert np.array_equal(s1, s2)
    assert s1.min() >= 0 and s1.max() <= 30


@given(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=1, max_size=20))
def test_normalized_vectors_are_valid(vals):
    d = Distribution.from_masses(vals, normalize=True)
    assert abs(d.mass.sum() - 1.0) < 1e-12
    assert d.mean() >= 0.0


def test_tail_mass_is_diagnostic_only():
    d = Distribution(np.array([0.25, 0.75]), tail_mass=1e-9)
    assert d.tail_mass == 1e-9
    assert abs(d.mass.sum() - 1.0) < 1e-12
