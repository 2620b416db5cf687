import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detachment.checks import najnudel_grid, random_poissonian_triples
from detachment.poissonized import (
    BinomialSpec,
    dominance_cdf_check,
    full_detachment_prob,
    lonely_count_law,
    lonely_fraction_base,
    najnudel_dominates,
    no_lonely_prob,
    poissonian_lonely_dominance,
)

B = BinomialSpec


def test_full_detachment_values():
    assert full_detachment_prob(0, 7) == 1
    assert full_detachment_prob(1, 1) == pytest.approx(2 / math.e)
    assert full_detachment_prob(50, 50) == pytest.approx((2 / math.e) ** 50, rel=1e-10)


def test_full_detachment_is_poisson_at_most_one_per_bus():
    lam, k = 3.0, 4
    x = lam / k
    assert full_detachment_prob(lam, k) == pytest.approx((math.exp(-x) * (1 + x)) ** k)


def test_full_detachment_increasing_in_k():
    vals = [full_detachment_prob(5.0, k) for k in range(1, 200)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_full_detachment_growing_intensity():
    # log P = -lambda^2/(2k) + O(lambda^3/k^2), so the sqrt(k) scale decides
    ks = [10**j for j in range(2, 7)]
    slow = [full_detachment_prob(k**0.25, k) for k in ks]
    assert all(b > a for a, b in zip(slow, slow[1:])) and slow[-1] > 0.999
    edge = [full_detachment_prob(math.sqrt(k), k) for k in ks]
    assert edge[-1] == pytest.approx(math.exp(-0.5), abs=1e-3)
    fast = [full_detachment_prob(k**0.6, k) for k in ks]
    assert all(b < a for a, b in zip(fast, fast[1:])) and fast[-1] < 1e-3


def test_no_lonely_values():
    assert no_lonely_prob(2, 1) == pytest.approx(1 - 2 * math.exp(-2))
    assert no_lonely_prob(2, 2) == pytest.approx((1 - math.exp(-1)) ** 2)
    assert no_lonely_prob(0, 5) == 1


@given(st.floats(0.01, 50), st.integers(1, 300))
def test_no_lonely_matches_f_power_and_decreases(lam, k):
    assert no_lonely_prob(lam, k) == pytest.approx(lonely_fraction_base(lam / k) ** lam, rel=1e-10)
    assert no_lonely_prob(lam, k + 1) <= no_lonely_prob(lam, k) * (1 + 1e-12)


def test_lonely_fraction_base_increasing():
    xs = np.linspace(0.001, 20, 20001)
    f = np.array([lonely_fraction_base(x) for x in xs])
    assert np.all(np.diff(f) > 0)
    assert f[0] == pytest.approx(math.exp(-1), rel=1e-2)
    assert lonely_fraction_base(1.0) > lonely_fraction_base(0.5)


def test_najnudel_examples():
    cases = [(B(3, 0.4), B(3, 0.5), True), (B(2, 0.5), B(3, 0.3), False), (B(2, 0.5), B(4, 0.5), True),
             (B(1, 1), B(1, 1), True), (B(2, 0), B(2, 0), True)]
    for Y, X, want in cases:
        assert najnudel_dominates(Y, X) is want
        assert dominance_cdf_check(Y, X) is want


def test_najnudel_degenerate_probabilities():
    assert najnudel_dominates(B(3, 0.2), B(2, 1.0)) is False  # fewer trials
    assert najnudel_dominates(B(2, 1.0), B(3, 0.9)) is False
    assert najnudel_dominates(B(2, 0.0), B(3, 0.0)) is True
    assert najnudel_dominates(B(2, 0.3), B(3, 0.0)) is False
    assert najnudel_dominates(B(2, 0.0), B(3, 0.3)) is True
    for Y, X in [(B(2, 0.0), B(3, 0.3)), (B(2, 0.3), B(3, 0.0)), (B(2, 1.0), B(3, 0.9))]:
        assert najnudel_dominates(Y, X) == dominance_cdf_check(Y, X)


def test_najnudel_exact_tie():
    # (1/2)^2 == (1/4)^1 exactly
    assert najnudel_dominates(B(1, 0.75), B(2, 0.5)) is True
    assert dominance_cdf_check(B(1, 0.75), B(2, 0.5)) is True


def test_najnudel_agrees_with_cdf_on_grid():
    assert najnudel_grid() == []


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.floats(0, 1), st.integers(1, 12), st.floats(0, 1))
def test_najnudel_agrees_with_cdf_random(m, q, n, p):
    assert najnudel_dominates(B(m, q), B(n, p)) == dominance_cdf_check(B(m, q), B(n, p))


def test_binomial_spec_validation():
    with pytest.raises(ValueError):
        B(0, 0.5)
    with pytest.raises(ValueError):
        B(2, 1.5)


def test_poissonian_dominance_examples():
    assert poissonian_lonely_dominance(1, 1, 2)
    assert poissonian_lonely_dominance(5, 2, 10)
    assert poissonian_lonely_dominance(0.1, 3, 4)
    for lam, k1, k2 in [(5, 2, 10), (0.1, 3, 4)]:
        assert dominance_cdf_check(lonely_count_law(lam, k1), lonely_count_law(lam, k2))
    with pytest.raises(ValueError):
        poissonian_lonely_dominance(1, 3, 3)


def test_poissonian_dominance_random_triples():
    assert all(poissonian_lonely_dominance(*t) for t in random_poissonian_triples(1000, seed=3))


def test_lonely_count_law_mean():
    law = lonely_count_law(4.0, 10)
    assert law.trials * law.success_prob == pytest.approx(4.0 * math.exp(-0.4))
