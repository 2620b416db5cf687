import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detachment.combinatorics import (
    StirlingTable,
    falling_factorial,
    log_falling_ratio,
    log_falling_ratio_array,
    log_two_f_zero,
    logsumexp,
    rennie_dobson_bounds,
    stirling2,
    stirling_table,
    stirling_table_by_summation,
    two_f_zero,
    two_f_zero_terms,
)


def test_falling_factorial_values():
    assert falling_factorial(5, 0) == 1
    assert falling_factorial(5, 2) == 20
    assert falling_factorial(3, 5) == 0
    assert falling_factorial(6, 6) == 720
    with pytest.raises(ValueError):
        falling_factorial(3, -1)


@given(st.integers(1, 60), st.integers(0, 40))
def test_log_falling_ratio_matches_rational(n, extra):
    k = n + extra
    exact = Fraction(falling_factorial(k, n), k**n)
    assert log_falling_ratio(k, n) == pytest.approx(math.log(exact), rel=1e-13, abs=1e-14)


def test_log_falling_ratio_domain():
    with pytest.raises(ValueError):
        log_falling_ratio(3, 4)
    with pytest.raises(ValueError):
        log_falling_ratio(0, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 400), st.lists(st.integers(0, 10**6), min_size=1, max_size=8))
def test_log_falling_ratio_array_matches_scalar(n, offsets):
    ks = np.array([n + o for o in offsets])
    got = log_falling_ratio_array(n, ks)
    want = np.array([log_falling_ratio(int(k), n) for k in ks])
    assert np.allclose(got, want, rtol=1e-12, atol=1e-15)


def test_log_falling_ratio_array_rejects_small_k():
    with pytest.raises(ValueError):
        log_falling_ratio_array(5, [4, 10])


def test_stirling_known_values():
    assert stirling2(0, 0) == 1
    assert stirling2(5, 2) == 15
    assert stirling2(10, 3) == 9330
    assert stirling2(3, 5) == 0
    assert stirling2(7, 0) == 0
    # Bell number B(10)
    assert sum(stirling2(10, b) for b in range(11)) == 115975


def test_stirling_table_grows_and_is_shared():
    big = stirling_table(150)
    assert big.max_a >= 150
    assert stirling_table(10) is stirling_table(20)
    assert big(150, 149) == math.comb(150, 2)
    assert big(150, 1) == 1


def test_stirling_recurrence_matches_summation_builder():
    table = StirlingTable(45)
    other = stirling_table_by_summation(45)
    for a in range(46):
        for b in range(46):
            assert table(a, b) == other[a][b]


@given(st.integers(1, 80))
def test_stirling_two_blocks_closed_form(a):
    assert stirling2(a, 2) == 2 ** (a - 1) - 1
    assert stirling2(a, a - 1) == math.comb(a, 2)


def test_rennie_dobson_bounds_hold_off_diagonal():
    for a in range(2, 61):
        for b in range(1, a):
            lo, hi = rennie_dobson_bounds(a, b)
            assert lo <= stirling2(a, b) <= hi


def test_rennie_dobson_tight_next_to_diagonal():
    for b in range(1, 30):
        lo, hi = rennie_dobson_bounds(b + 1, b)
        assert lo == hi == stirling2(b + 1, b)


def test_rennie_dobson_diagonal_rejected():
    with pytest.raises(ValueError):
        rennie_dobson_bounds(4, 4)


def test_two_f_zero_small_values():
    assert two_f_zero(2, 2, Fraction(1, 2)) == Fraction(7, 2)
    assert two_f_zero(0, 5, Fraction(1, 3)) == 1
    assert two_f_zero(4, 0, Fraction(1, 3)) == 1
    assert two_f_zero_terms(3, 2, Fraction(1)) == [1, 6, 6]


@given(st.integers(0, 25), st.integers(0, 25), st.integers(1, 50))
def test_two_f_zero_symmetric_and_float_agrees(n, l, q):
    z = Fraction(1, q)
    exact = two_f_zero(n, l, z)
    assert exact == two_f_zero(l, n, z)
    assert two_f_zero(n, l, 1 / q) == pytest.approx(float(exact), rel=1e-12)


def test_log_two_f_zero_large_arguments():
    # direct evaluation in exact arithmetic for a moderately large case
    exact = two_f_zero(300, 200, Fraction(1, 500))
    assert log_two_f_zero(300, 200, 1 / 500) == pytest.approx(math.log(exact), rel=1e-12)
    with pytest.raises(ValueError):
        log_two_f_zero(3, 3, 0.0)


def test_logsumexp():
    assert logsumexp([]) == -math.inf
    assert logsumexp([-math.inf, -math.inf]) == -math.inf
    assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2))
