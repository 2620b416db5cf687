"""Poisson number of passengers, and stochastic order between binomial laws.

With N ~ Poisson(lambda) passengers the bus counts at time k are iid
Poisson(lambda/k), which makes full detachment and the lonely count explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

__all__ = [
    "BinomialSpec",
    "full_detachment_prob",
    "no_lonely_prob",
    "lonely_fraction_base",
    "najnudel_dominates",
    "dominance_cdf_check",
    "lonely_count_law",
    "poissonian_lonely_dominance",
]


@dataclass(frozen=True)
class BinomialSpec:
    trials: int
    success_prob: float

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials}")
        if not 0 <= self.success_prob <= 1:
            raise ValueError(f"success_prob must lie in [0, 1], got {self.success_prob}")


def _check(lam, k):
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")


def full_detachment_prob(lam: float, k: int) -> float:
    """P(no bus holds two or more passengers) = e^{-lambda} (1 + lambda/k)^k."""
    _check(lam, k)
    return math.exp(-lam + k * math.log1p(lam / k))


def no_lonely_prob(lam: float, k: int) -> float:
    """P(no bus holds exactly one passenger) = (1 - (lambda/k) e^{-lambda/k})^k."""
    _check(lam, k)
    x = lam / k
    return math.exp(k * math.log1p(-x * math.exp(-x)))


def lonely_fraction_base(x: float) -> float:
    """f(x) = (1 - x e^{-x})^{1/x}, so that no_lonely_prob(lam, k) = f(lam/k)^lam.

    f increases from e^{-1} (as x -> 0) to 1 (as x -> infinity).
    """
    if x <= 0:
        raise ValueError("f is defined for x > 0")
    return math.exp(math.log1p(-x * math.exp(-x)) / x)


def _log1m(p) -> float:
    return math.log1p(-float(p))


def _exact(p) -> Fraction:
    return Fraction(p) if isinstance(p, (Rational, float)) else Fraction(float(p))


def najnudel_dominates(Y: BinomialSpec, X: BinomialSpec) -> bool:
    """Whether Bin(m, q) is stochastically below Bin(n, p).

    For 0 < p, q < 1: true iff n >= m and (1-p)^n <= (1-q)^m.  When p or q is
    0 or 1 one of the laws is a point mass and the answer is read off
    directly, before any logarithm is taken.  Near-ties are resolved exactly.
    """
    m, q = Y.trials, Y.success_prob
    n, p = X.trials, X.success_prob
    # point masses first: the trial-count condition only binds when q > 0
    if q == 0:
        return True  # Y is 0
    if p == 0:
        return False  # X is 0, Y is not
    if q == 1:
        return p == 1 and n >= m  # Y is m
    if p == 1:
        return n >= m  # X is n
    if n < m:
        return False
    lhs = n * _log1m(p)
    rhs = m * _log1m(q)
    if abs(lhs - rhs) > 1e-9 * max(1.0, abs(lhs), abs(rhs)):
        return lhs <= rhs
    return (1 - _exact(p)) ** n <= (1 - _exact(q)) ** m


def _binomial_cdf(n: int, p: Fraction) -> list:
    out, acc = [], Fraction(0)
    for t in range(n + 1):
        acc += math.comb(n, t) * p ** t * (1 - p) ** (n - t)
        out.append(acc)
    return out


def dominance_cdf_check(Y: BinomialSpec, X: BinomialSpec) -> bool:
    """Direct check that CDF_X(t) <= CDF_Y(t) for every integer t.

    Float probabilities are converted to the exact rational they represent,
    so the comparison is carried out without rounding.
    """
    cy = _binomial_cdf(Y.trials, _exact(Y.success_prob))
    cx = _binomial_cdf(X.trials, _exact(X.success_prob))
    top = max(len(cx), len(cy))
    cy += [Fraction(1)] * (top - len(cy))
    cx += [Fraction(1)] * (top - len(cx))
    return all(a <= b for a, b in zip(cx, cy))


def lonely_count_law(lam: float, k: int) -> BinomialSpec:
    """Law of the lonely count at time k: Bin(k, (lambda/k) e^{-lambda/k})."""
    _check(lam, k)
    x = lam / k
    return BinomialSpec(k, x * math.exp(-x))


def poissonian_lonely_dominance(lam: float, k1: int, k2: int) -> bool:
    """Whether the lonely count at time k1 is stochastically below that at k2."""
    if not 0 < k1 < k2:
        raise ValueError(f"need 0 < k1 < k2, got k1={k1}, k2={k2}")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return najnudel_dominates(lonely_count_law(lam, k1), lonely_count_law(lam, k2))
