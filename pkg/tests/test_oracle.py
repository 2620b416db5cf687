from fractions import Fraction

import pytest

from detachment import analytics as an
from detachment import oracle
from detachment.checks import conditional_dominance_exact, oracle_equality, toth_dominance_exact


def test_single_time_examples():
    assert oracle.enumerate_single_time(2, 2).mass == {(0, 1, 4): Fraction(1, 2), (2, 2, 2): Fraction(1, 2)}
    assert oracle.enumerate_single_time(1, 3).mass == {(1, 1, 1): 1}
    L = oracle.enumerate_single_time(3, 3).marginal(0)
    assert L == {3: Fraction(2, 9), 1: Fraction(18, 27), 0: Fraction(1, 9)}


def test_exact_pmf_invariants():
    with pytest.raises(ValueError):
        oracle.ExactPmf({(0,): Fraction(1, 2)})
    with pytest.raises(ValueError):
        oracle.ExactPmf({(0,): Fraction(3, 2), (1,): Fraction(-1, 2)})
    pmf = oracle.enumerate_single_time(3, 4)
    assert sum(pmf.mass.values()) == 1
    assert pmf.cdf(0)[3] == 1


def test_budget():
    with pytest.raises(oracle.BudgetExceeded):
        oracle.enumerate_single_time(8, 10)
    with pytest.raises(oracle.BudgetExceeded):
        oracle.enumerate_two_time(3, 4, 2, budget=100)


def test_two_time_examples():
    assert oracle.enumerate_two_time(2, 2, 1).joint_detached == Fraction(4, 9)
    assert oracle.enumerate_two_time(2, 3, 1).joint_detached == Fraction(5, 8)
    assert oracle.enumerate_two_time(1, 3, 2).joint_detached == 1


def test_three_time_examples():
    law = oracle.enumerate_three_time(2, 2, 3, 4)
    assert (law.triple, law.sandwich) == (Fraction(5, 12), Fraction(1, 48))
    one = oracle.enumerate_three_time(1, 1, 2, 5)
    assert (one.triple, one.sandwich) == (1, 0)
    law = oracle.enumerate_three_time(3, 3, 4, 5)
    assert law.triple == an.triple_detached(3, 3, 4, 5, exact=True)
    assert law.sandwich == an.sandwich_prob(3, 3, 4, 5, exact=True)
    assert law.markov_gap() == 0


def test_tau_cdf_truncated_brackets():
    trunc, exact = oracle.tau_cdf_truncated(2, 3, 1000)
    assert exact == Fraction(1, 2) and exact <= trunc < exact + Fraction(1, 100)
    assert oracle.tau_cdf_truncated(1, 1, 50) == (1, 1)
    trunc, exact = oracle.tau_cdf_truncated(3, 5, 10**4)
    assert exact == Fraction(2, 7) and trunc >= exact
    gaps = [oracle.tau_cdf_truncated(3, 5, K)[0] - exact for K in (10, 100, 1000)]
    assert gaps[0] > gaps[1] > gaps[2] > 0
    with pytest.raises(ValueError):
        oracle.tau_cdf_truncated(3, 5, 5)


def test_closed_forms_match_enumeration():
    verdicts, bad = oracle_equality()
    assert all(verdicts.values()), bad[:10]


def test_toth_dominance_small():
    assert toth_dominance_exact() == []


def test_conditional_dominance_small():
    assert conditional_dominance_exact() == []


def test_cdf_dominated_helper():
    assert oracle.cdf_dominated({0: Fraction(1)}, {1: Fraction(1)})
    assert not oracle.cdf_dominated({1: Fraction(1)}, {0: Fraction(1)})
