"""Brute-force exact laws on tiny instances.

Every assignment of passengers to buses (and every displacement pattern
between two times) is enumerated as an integer numpy array; weights are
integers and every probability is returned as a ``Fraction``.  Nothing here
goes through floating point.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .analytics import pi_detached, tau_cdf

DEFAULT_BUDGET = 10**7


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class ExactPmf:
    """Exact pmf over tuple-valued outcomes."""

    mass: dict

    def __post_init__(self):
        if sum(self.mass.values(), Fraction(0)) != 1:
            raise ValueError("masses do not sum to 1")
        if any(p < 0 for p in self.mass.values()):
            raise ValueError("negative mass")

    @property
    def support(self) -> list:
        return sorted(self.mass)

    def __getitem__(self, outcome) -> Fraction:
        return self.mass.get(outcome, Fraction(0))

    def marginal(self, index: int) -> dict:
        out = Counter()
        for outcome, p in self.mass.items():
            out[outcome[index]] += p
        return dict(out)

    def prob(self, event) -> Fraction:
        return sum((p for o, p in self.mass.items() if event(o)), Fraction(0))

    def expect(self, f) -> Fraction:
        return sum((p * f(o) for o, p in self.mass.items()), Fraction(0))

    def cdf(self, index: int) -> dict:
        """t -> P(component <= t) on the integer range of that component."""
        marg = self.marginal(index)
        out, acc = {}, Fraction(0)
        for t in range(min(marg), max(marg) + 1):
            acc += marg.get(t, 0)
            out[t] = acc
        return out

    def conditional(self, index: int, given_index: int, value) -> dict:
        sub = {o: p for o, p in self.mass.items() if o[given_index] == value}
        total = sum(sub.values(), Fraction(0))
        out = Counter()
        for o, p in sub.items():
            out[o[index]] += p / total
        return dict(out)


def _check_budget(size: int, budget: int):
    if size > budget:
        raise BudgetExceeded(f"enumeration of {size} outcomes exceeds budget {budget}")


def _grid(radices: list) -> np.ndarray:
    """All mixed-radix digit vectors, one per row, last digit fastest."""
    if not radices:
        return np.zeros((1, 0), dtype=np.int64)
    # bus labels stay tiny here, int8 keeps the arrays small
    idx = np.indices(radices, dtype=np.int8 if max(radices) < 100 else np.int64)
    return idx.reshape(len(radices), -1).T


def _counts(assign: np.ndarray, n_buses: int) -> np.ndarray:
    """Bus head counts per row; buses are 1..n_buses."""
    return np.stack([(assign == b).sum(axis=1, dtype=np.int64) for b in range(1, n_buses + 1)], axis=1)


def _observables(assign: np.ndarray, n_buses: int):
    c = _counts(assign, n_buses)
    return (c == 1).sum(axis=1), (c > 0).sum(axis=1), (c * c).sum(axis=1)


class _Tally:
    """Integer weight per outcome tuple, accumulated chunk by chunk."""

    def __init__(self):
        self.acc = Counter()

    def add(self, keys, weights: np.ndarray):
        # pack each outcome tuple into one integer, then sum weights per key
        radix = [int(k.max()) + 1 for k in keys]
        code = np.zeros(len(weights), dtype=np.int64)
        for k, r in zip(keys, radix):
            code = code * r + k
        order = np.argsort(code, kind="stable")
        code, weights = code[order], weights[order]
        starts = np.flatnonzero(np.r_[True, code[1:] != code[:-1]])
        sums = np.add.reduceat(weights, starts)
        for c, w in zip(code[starts].tolist(), sums.tolist()):
            key = []
            for r in reversed(radix):
                c, digit = divmod(c, r)
                key.append(digit)
            self.acc[tuple(reversed(key))] += w

    def pmf(self, denominator: int) -> ExactPmf:
        return ExactPmf({key: Fraction(w, denominator) for key, w in self.acc.items() if w})


_CHUNK_ROWS = 1 << 18


def _uniform_assignments(n: int, k: int, fan_out: int = 1):
    """All k^n assignments (buses 1..k) in chunks whose expansion by
    ``fan_out`` displacement patterns stays near _CHUNK_ROWS rows."""
    a = _grid([k] * n) + 1
    step = max(1, _CHUNK_ROWS // fan_out)
    for start in range(0, len(a), step):
        yield a[start:start + step]


def enumerate_single_time(n: int, k: int, budget: int = DEFAULT_BUDGET) -> ExactPmf:
    """Exact joint law of (L, N, clump) at time k from all k^n assignments."""
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    _check_budget(k**n, budget)
    tally = _Tally()
    for a in _uniform_assignments(n, k):
        tally.add(list(_observables(a, k)), np.ones(len(a), dtype=np.int64))
    return tally.pmf(k**n)


def _displace(a: np.ndarray, k: int, l: int):
    """Expand each row of assignments at time k into all (l+1)^n
    displacement patterns: digit 0 keeps the bus (weight k), digit j >= 1
    moves to bus k+j (weight 1).  Returns (new rows, parent index, weights);
    the weights sum to (k+l)^n per parent."""
    n = a.shape[1]
    d = _grid([l + 1] * n)
    w = k ** (d == 0).sum(axis=1, dtype=np.int64)
    parent = np.repeat(np.arange(len(a)), len(d))
    d_all = np.tile(d, (len(a), 1))
    new = np.where(d_all == 0, a[parent], d_all + np.int64(k))
    return new, parent, np.tile(w, len(a))


@dataclass(frozen=True)
class TwoTimeLaw:
    n: int
    k: int
    l: int
    lonely: ExactPmf  # joint law of (L_k, L_{k+l})

    @property
    def joint_detached(self) -> Fraction:
        return self.lonely[(self.n, self.n)]

    @property
    def cond_detached(self) -> Fraction:
        return self.joint_detached / self.lonely.prob(lambda o: o[0] == self.n)

    @property
    def cond_detached_given_not(self) -> Fraction:
        return self.detachment_time / self.lonely.prob(lambda o: o[0] < self.n)

    @property
    def detachment_time(self) -> Fraction:
        """P(L_k < n, L_{k+l} = n); with l = 1 a detachment time at k+1."""
        return self.lonely.prob(lambda o: o[0] < self.n and o[1] == self.n)


def enumerate_two_time(n: int, k: int, l: int, budget: int = DEFAULT_BUDGET) -> TwoTimeLaw:
    if n < 1 or k < 1 or l < 1:
        raise ValueError("need n, k, l >= 1")
    fan = (l + 1) ** n
    _check_budget(k**n * fan, budget)
    tally = _Tally()
    for a in _uniform_assignments(n, k, fan):
        L1 = _observables(a, k)[0]
        b, parent, w = _displace(a, k, l)
        tally.add([L1[parent], _observables(b, k + l)[0]], w)
    return TwoTimeLaw(n, k, l, tally.pmf(k**n * (k + l) ** n))


@dataclass(frozen=True)
class ThreeTimeLaw:
    n: int
    times: tuple
    lonely: ExactPmf  # joint law of (L_k1, L_k2, L_k3)

    @property
    def triple(self) -> Fraction:
        return self.lonely[(self.n,) * 3]

    @property
    def sandwich(self) -> Fraction:
        n = self.n
        return self.lonely.prob(lambda o: o[0] == n and o[1] < n and o[2] == n)

    def markov_gap(self) -> Fraction:
        """P(det k3 | det k1, det k2) - P(det k3 | det k2); zero when the
        future after a detached state does not depend on the earlier past."""
        n = self.n
        both = self.lonely.prob(lambda o: o[0] == n and o[1] == n)
        at2 = self.lonely.prob(lambda o: o[1] == n)
        at23 = self.lonely.prob(lambda o: o[1] == n and o[2] == n)
        return self.triple / both - at23 / at2


def enumerate_three_time(n: int, k1: int, k2: int, k3: int, budget: int = DEFAULT_BUDGET) -> ThreeTimeLaw:
    if not 1 <= k1 < k2 < k3:
        raise ValueError("need 1 <= k1 < k2 < k3")
    l1, l2 = k2 - k1, k3 - k2
    fan = (l1 + 1) ** n * (l2 + 1) ** n
    _check_budget(k1**n * fan, budget)
    tally = _Tally()
    for a in _uniform_assignments(n, k1, fan):
        L1 = _observables(a, k1)[0]
        b, p1, w1 = _displace(a, k1, l1)
        L2 = _observables(b, k2)[0]
        c, p2, w2 = _displace(b, k2, l2)
        tally.add([L1[p1][p2], L2[p2], _observables(c, k3)[0]], w1[p2] * w2)
    return ThreeTimeLaw(n, (k1, k2, k3), tally.pmf(k1**n * k2**n * k3**n))


def tau_cdf_truncated(n: int, k: int, K: int) -> tuple[Fraction, Fraction]:
    """(truncated, exact) for P(tau <= k).

    ``truncated`` = pi_{n,k} prod_{i=k+1}^{K} P(det at i | det at i-1), the
    probability of staying detached over k..K; it decreases to the exact
    value as K grows, so truncated >= exact.
    """
    if not 1 <= n <= k < K:
        raise ValueError(f"need n <= k < K, got n={n}, k={k}, K={K}")
    num, den = 1, 1
    for i in range(k + 1, K + 1):
        # ((i-1)/i)^n (n+i-1)/(i-1)
        num *= (i - 1) ** (n - 1) * (n + i - 1)
        den *= i**n
    truncated = pi_detached(n, k, exact=True) * Fraction(num, den)
    exact = tau_cdf(n, k, exact=True)
    assert truncated >= exact
    return truncated, exact


def cdf_dominated(lower: dict, upper: dict) -> bool:
    """True when the law ``lower`` is stochastically below ``upper``:
    P_upper(X <= t) <= P_lower(X <= t) for every integer t."""
    lo = min(min(lower), min(upper))
    hi = max(max(lower), max(upper))
    a = b = Fraction(0)
    for t in range(lo, hi + 1):
        a += lower.get(t, 0)
        b += upper.get(t, 0)
        if b > a:
            return False
    return True


def consecutive_dominance(n: int, k: int) -> tuple[bool, bool]:
    """Whether L_k is below L_{k+1} and N_k below N_{k+1} in law."""
    now = enumerate_single_time(n, k)
    nxt = enumerate_single_time(n, k + 1)
    return (cdf_dominated(now.marginal(0), nxt.marginal(0)),
            cdf_dominated(now.marginal(1), nxt.marginal(1)))
