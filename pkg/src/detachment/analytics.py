"""Closed-form probabilities, moments and limit values of the detachment process.

Most functions take an ``exact`` flag: ``True`` returns a ``Fraction``,
``False`` a ``float`` evaluated in the log domain, and ``None`` (default)
picks exact arithmetic when every size argument is within ``EXACT_BUDGET``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import mpmath
import numpy as np

from .combinatorics import (
    falling_factorial,
    log_falling_ratio,
    log_falling_ratio_array,
    log_two_f_zero,
    stirling2,
    two_f_zero,
)

EXACT_BUDGET = 200

# P(tau > k) ~ n(n-1)/k, not 2n(n-1)/k: the constant follows from
# 1 - C(k,n)/C(k+n-1,n) and is checked against it directly.


def _exact(exact, *sizes) -> bool:
    if exact is None:
        return max(sizes) <= EXACT_BUDGET
    return bool(exact)


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value}")


@dataclass(frozen=True)
class ProcessParams:
    """n passengers observed at time k (k buses)."""

    n: int
    k: int

    def __post_init__(self):
        _check_positive(n=self.n, k=self.k)


@dataclass(frozen=True)
class LonelyMoments:
    mean: float | Fraction
    variance: float | Fraction

    @property
    def concentration_ratio(self):
        """Var(L) / E(L)^2; undefined when no passenger can be lonely."""
        if self.mean == 0:
            raise ValueError("concentration ratio undefined: mean number of lonely passengers is 0")
        return self.variance / self.mean ** 2


@dataclass(frozen=True)
class CriticalWindow:
    n: int
    y: float
    k_of_n_y: float
    limit_c_of_y: float


# -- single time ---------------------------------------------------------


def pi_detached(n: int, k: int, exact=None):
    """P(L_k = n) = (k)_n / k^n; zero when k < n."""
    _check_positive(n=n, k=k)
    if _exact(exact, n, k):
        return Fraction(falling_factorial(k, n), k ** n)
    if k < n:
        return 0.0
    return math.exp(log_falling_ratio(k, n))


def log_pi_detached(n: int, k: int) -> float:
    _check_positive(n=n, k=k)
    if k < n:
        return -math.inf
    return log_falling_ratio(k, n)


def detachment_time_prob(n: int, k: int, exact=None):
    """P(L_{k-1} < n, L_k = n) = n(n-1)(k-2)_{n-2} / k^n."""
    _check_positive(n=n, k=k)
    use_exact = _exact(exact, n, k)
    if n == 1 or k < n:
        return Fraction(0) if use_exact else 0.0
    if use_exact:
        return Fraction(n * (n - 1) * falling_factorial(k - 2, n - 2), k ** n)
    log_p = log_falling_ratio(k, n) - math.log1p(-1 / k) + math.log(n * (n - 1)) - 2 * math.log(k)
    return math.exp(log_p)


def log_pi_bounds(n: int, k: int) -> tuple[float, float]:
    """Birthday-problem sandwich for log P(L_k = n), valid for k >= n >= 2."""
    if not 2 <= n <= k:
        raise ValueError(f"log_pi_bounds needs 2 <= n <= k, got n={n}, k={k}")
    upper = -n * (n - 1) / (2 * k) - n * (n - 1) * (2 * n - 1) / (12 * k * k)
    lower = upper - n * n * (n - 1) ** 2 / (12 * k * k * (k - n + 1))
    return lower, upper


# -- several times ------------------------------------------------------


def joint_detached(n: int, k: int, l: int, exact=None):
    """P(L_k = L_{k+l} = n) = (k)_n / (k+l)^n * 2F0(-n, -l; ; 1/k)."""
    _check_positive(n=n, k=k, l=l)
    if k < n:
        raise ValueError(f"joint_detached needs k >= n, got n={n}, k={k}")
    if _exact(exact, n, k + l):
        return Fraction(falling_factorial(k, n), (k + l) ** n) * two_f_zero(n, l, Fraction(1, k))
    log_p = log_falling_ratio(k, n) - n * math.log1p(l / k) + log_two_f_zero(n, l, 1 / k)
    return math.exp(log_p)


def cond_detached(n: int, k1: int, k2: int, exact=None):
    """P(L_{k2} = n | L_{k1} = n) = (k1/k2)^n 2F0(-n, -(k2-k1); ; 1/k1)."""
    _check_positive(n=n, k1=k1)
    if k1 < n or k2 <= k1:
        raise ValueError(f"cond_detached needs n <= k1 < k2, got n={n}, k1={k1}, k2={k2}")
    l = k2 - k1
    if _exact(exact, n, k2):
        return Fraction(k1, k2) ** n * two_f_zero(n, l, Fraction(1, k1))
    return math.exp(-n * math.log1p(l / k1) + log_two_f_zero(n, l, 1 / k1))


def cond_detached_given_not(n: int, k1: int, k2: int, exact=None):
    """P(L_{k2} = n | L_{k1} != n) = (pi(k2) - P(L_{k1} = L_{k2} = n)) / (1 - pi(k1))."""
    _check_positive(n=n, k1=k1)
    if not (2 <= n <= k2 and k1 < k2):
        raise ValueError(f"cond_detached_given_not needs 2 <= n <= k2 and k1 < k2, got n={n}, k1={k1}, k2={k2}")
    use_exact = _exact(exact, n, k2)
    pi1 = pi_detached(n, k1, use_exact)
    if pi1 == 1:
        raise ValueError("conditioning event L_{k1} != n has probability zero")
    both = joint_detached(n, k1, k2 - k1, use_exact) if k1 >= n else 0
    return (pi_detached(n, k2, use_exact) - both) / (1 - pi1)


def triple_detached(n: int, k1: int, k2: int, k3: int, exact=None):
    """P(L_{k1} = L_{k2} = L_{k3} = n), chained through the Markov property."""
    if not (n <= k1 < k2 < k3):
        raise ValueError(f"triple_detached needs n <= k1 < k2 < k3, got {n}, {k1}, {k2}, {k3}")
    use_exact = _exact(exact, n, k3)
    return (pi_detached(n, k1, use_exact)
            * cond_detached(n, k1, k2, use_exact)
            * cond_detached(n, k2, k3, use_exact))


def sandwich_prob(n: int, k1: int, k2: int, k3: int, exact=None):
    """P(L_{k1} = L_{k3} = n, L_{k2} != n)."""
    use_exact = _exact(exact, n, k3)
    triple = triple_detached(n, k1, k2, k3, use_exact)
    value = joint_detached(n, k1, k3 - k1, use_exact) - triple
    if not use_exact:
        # both terms are O(1); tiny negative values are rounding
        value = max(value, 0.0)
    return value


# -- permanent detachment ---------------------------------------------------


def tau_cdf(n: int, k: int, exact=None):
    """P(tau <= k) = C(k, n) / C(k+n-1, n), zero for k < n."""
    _check_positive(n=n, k=k)
    if _exact(exact, n, k):
        return Fraction(math.comb(k, n), math.comb(k + n - 1, n))
    return math.exp(log_tau_cdf(n, k))


def log_tau_cdf(n: int, k: int) -> float:
    """log P(tau <= k) = sum_{j=1}^{n-1} log((k-j)/(k+j))."""
    _check_positive(n=n, k=k)
    if k < n:
        return -math.inf
    j = np.arange(1, n, dtype=float)
    return float(np.log1p(-2 * j / (k + j)).sum())


def tau_tail(n: int, k: int, exact=None):
    """P(tau > k), computed without cancellation in float mode."""
    if _exact(exact, n, k):
        return 1 - tau_cdf(n, k, True)
    return -math.expm1(log_tau_cdf(n, k))


def tau_tail_constant(n: int) -> int:
    """k P(tau > k) -> n(n-1) as k -> infinity."""
    return n * (n - 1)


def ie_cdf(x: float) -> float:
    """Distribution function exp(-1/x) of the inverse exponential law IE(1)."""
    if x <= 0:
        raise ValueError(f"ie_cdf needs x > 0, got {x}")
    if math.isinf(x):
        return 1.0
    return math.exp(-1 / x)


def ie_density(x: float) -> float:
    if x <= 0:
        raise ValueError(f"ie_density needs x > 0, got {x}")
    return math.exp(-1 / x) / (x * x)


IE_MODE = 0.5


# -- expected number of detachment states ----------------------------------------


def expected_detachment_states(n: int, k: int, exact=None, chunk: int = 1 << 20):
    """e(n, k) = sum_{j=n}^{k} (j)_n / j^n.

    Float mode evaluates every term in the log domain and accumulates with
    ``math.fsum``.  Terms with n(n-1)/(2j) > 750 are skipped: the birthday
    upper bound puts them below exp(-750), which is zero in double precision.
    """
    _check_positive(n=n)
    if _exact(exact, n, k):
        return sum((pi_detached(n, j, True) for j in range(n, k + 1)), Fraction(0))
    if k < n:
        return 0.0
    start = max(n, math.ceil(n * (n - 1) / 1500))
    partial = []
    for lo in range(start, k + 1, chunk):
        ks = np.arange(lo, min(lo + chunk, k + 1), dtype=float)
        partial.append(math.fsum(np.exp(log_falling_ratio_array(n, ks))))
    return math.fsum(partial)


def critical_k(n: float, y: float) -> float:
    """k(n, y) = n^2 / (2(2 log n - 2 log log n + y)), a real time scale."""
    if n < 3:
        raise ValueError(f"critical_k needs n >= 3, got {n}")
    denom = 2 * (2 * math.log(n) - 2 * math.log(math.log(n)) + y)
    if denom <= 0:
        raise ValueError(f"critical_k denominator is not positive for n={n}, y={y}")
    return n * n / denom


def critical_limit(y: float) -> float:
    """lim e(n, k(n, y)) = exp(-y) / 8."""
    return math.exp(-y) / 8


def critical_window(n: int, y: float) -> CriticalWindow:
    return CriticalWindow(n=n, y=y, k_of_n_y=critical_k(n, y), limit_c_of_y=critical_limit(y))


# -- lonely passengers ------------------------------------------------------


def lonely_moments(n: int, k: int, exact=None) -> LonelyMoments:
    """Mean and variance of L_k from the indicator decomposition over buses."""
    _check_positive(n=n, k=k)
    if _exact(exact, n, k):
        mean = n * Fraction(k - 1, k) ** (n - 1)
        if n >= 2 and k >= 2:
            pair = Fraction(n * (n - 1), k * k) * Fraction(k - 2, k) ** (n - 2)
        else:
            pair = Fraction(0)
        return LonelyMoments(mean, mean + k * (k - 1) * pair - mean ** 2)
    if k == 1:
        mean = float(n == 1)
        return LonelyMoments(mean, 0.0)
    log_mean = math.log(n) + (n - 1) * math.log1p(-1 / k)
    mean = math.exp(log_mean)
    if n == 1:
        return LonelyMoments(mean, 0.0)
    if k == 2 and n > 2:
        # no two distinct singleton buses can coexist with a third passenger
        pair_term = 0.0
    else:
        log_pair = (math.log(n * (n - 1)) - 2 * math.log(k)
                    + ((n - 2) * math.log1p(-2 / k) if n > 2 else 0.0))
        pair_term = math.exp(math.log(k * (k - 1)) + log_pair)
    # Var = M + k(k-1)A - M^2, with k(k-1)A - M^2 = M^2 expm1(log(k(k-1)A / M^2))
    if pair_term == 0.0:
        variance = mean - mean * mean
    else:
        rel = math.expm1(math.log(pair_term) - 2 * log_mean)
        variance = mean + mean * mean * rel
    return LonelyMoments(mean, variance)


def _lonely_inclusion_terms_exact(n: int, k: int) -> list[Fraction]:
    # S_i = P(a given set of i buses each hold exactly one passenger) * C(k, i)
    top = min(n, k)
    denom = k ** n
    return [Fraction(math.comb(k, i) * falling_factorial(n, i) * (k - i) ** (n - i), denom)
            for i in range(top + 1)]


def lonely_pmf(n: int, k: int, exact=None, tol: float = 1e-30, dps: int = 60) -> list:
    """Law of L_k as a list indexed by the number of lonely passengers 0..min(n, k).

    Inclusion-exclusion over the set of singleton buses.  Exact mode sums every
    term; float mode stops once the binomial moments
    S_i = C(k,i)(n)_i(k-i)^(n-i)/k^n are decreasing and 2^i S_i is below ``tol``, and
    works with ``dps`` digits beyond the size of the largest alternating term.
    """
    _check_positive(n=n, k=k)
    top = min(n, k)
    if _exact(exact, n, k):
        S = _lonely_inclusion_terms_exact(n, k)
        return [sum((-1) ** (i - j) * math.comb(i, j) * S[i] for i in range(j, top + 1))
                for j in range(top + 1)]
    def log_terms(count):
        log_k = mpmath.log(k)
        for i in range(count):
            yield (mpmath.log(mpmath.binomial(k, i)) + mpmath.loggamma(n + 1) - mpmath.loggamma(n - i + 1)
                   + ((n - i) * mpmath.log(k - i) if n > i else 0) - n * log_k)

    # first pass: where to truncate and how large the alternating terms get
    with mpmath.workdps(30):
        log_S = []
        for log_s in log_terms(top + 1):
            log_S.append(log_s)
            i = len(log_S) - 1
            # a dropped term enters P(L = j) with weight C(i, j) <= 2^i
            if i > 2 and log_s + i * math.log(2) < math.log(tol) and log_s < log_S[-2]:
                break
    # C(i, j) <= 2^i bounds the growth of each alternating term
    magnitude = max(float(s) + i * math.log(2) for i, s in enumerate(log_S)) / math.log(10)
    with mpmath.workdps(dps + max(0, math.ceil(magnitude))):
        S = [mpmath.exp(s) for s in log_terms(len(log_S))]
        m = len(S)
        pmf = []
        for j in range(min(m, top + 1)):
            total = mpmath.fsum((-1) ** (i - j) * mpmath.binomial(i, j) * S[i] for i in range(j, m))
            pmf.append(max(0.0, float(total)))
    pmf += [0.0] * (top + 1 - len(pmf))
    return pmf


def prob_some_lonely(n: int, k: int, exact=None):
    """P(L_k >= 1)."""
    return 1 - lonely_pmf(n, k, exact)[0]


# -- support size ------------------------------------------------------------


def support_tail(n: int, k: int, m: int, exact=None):
    """P(N_k >= m) = k!/(k-m)! (k^-m + sum_{u=m}^{n-1} k^-(u+1) S(u, m-1))."""
    if n < 2:
        raise ValueError(f"support_tail needs n >= 2, got n={n}")
    if not 1 <= m <= min(n, k):
        raise ValueError(f"support_tail needs 1 <= m <= min(n, k), got m={m}, n={n}, k={k}")
    value = falling_factorial(k, m) * (Fraction(1, k ** m) + sum(
        (Fraction(stirling2(u, m - 1), k ** (u + 1)) for u in range(m, n)), Fraction(0)))
    return value if _exact(exact, n, k) else float(value)


def support_pmf(n: int, k: int, exact=None) -> dict:
    """P(N_k = r) for r = 1..min(n, k).

    Exact mode uses the alternating binomial sum over rationals; float mode
    switches to the forward birth chain, which has no cancellation.
    """
    _check_positive(n=n, k=k)
    if not _exact(exact, n, k):
        return support_pmf_birth_chain(n, k, exact=False)
    pmf = {}
    for r in range(1, min(n, k) + 1):
        inner = sum(((-1) ** (r - j) * math.comb(r - 1, j - 1) * Fraction(j, k) ** (n - 1)
                     for j in range(1, r + 1)), Fraction(0))
        pmf[r] = math.comb(k - 1, r - 1) * inner
    return pmf


def support_pmf_birth_chain(n: int, k: int, exact=None) -> dict:
    """Law of N_k by seating passengers one at a time: with m occupied buses the
    next passenger opens a new one with probability (k - m)/k."""
    _check_positive(n=n, k=k)
    use_exact = _exact(exact, n, k)
    one = Fraction(1) if use_exact else 1.0
    top = min(n, k)
    dist = [0 * one] * (top + 1)
    dist[1] = one
    for _ in range(n - 1):
        nxt = [0 * one] * (top + 1)
        for m in range(1, top + 1):
            p = dist[m]
            if not p:
                continue
            stay = Fraction(m, k) if use_exact else m / k
            nxt[m] += p * stay
            if m < top:
                nxt[m + 1] += p * (1 - stay)
        dist = nxt
    return {r: dist[r] for r in range(1, top + 1)}


def support_gf(n: int, k: int, z):
    """E z^{N_k} = sum_j C(k-1, j-1) (j/k)^(n-1) z^j (1-z)^(k-j)."""
    _check_positive(n=n, k=k)
    if n == 1:
        return z
    if isinstance(z, Rational):
        z = Fraction(z)
        return sum((math.comb(k - 1, j - 1) * Fraction(j, k) ** (n - 1) * z ** j * (1 - z) ** (k - j)
                    for j in range(1, k + 1)), Fraction(0))
    return math.fsum(math.comb(k - 1, j - 1) * (j / k) ** (n - 1) * z ** j * (1 - z) ** (k - j)
                     for j in range(1, k + 1))


def support_moments(n: int, k: int, exact=None) -> tuple:
    """(E N_k, Var N_k) from the closed forms."""
    _check_positive(n=n, k=k)
    if _exact(exact, n, k):
        a, b = Fraction(k - 1, k), Fraction(k - 2, k)
    else:
        a, b = 1 - 1 / k, 1 - 2 / k
    mean = k * (1 - a ** n)
    var = (k - 1) * (a ** (n - 1) - (k - 1) * a ** (2 * (n - 1)) + (k - 2) * b ** (n - 1))
    return mean, var


# -- large-k and n^2-scale limits ---------------------------------------------------


def minmax_limit_cdf(n: int, x: float, which: str) -> float:
    """k -> infinity law of m_k/k (Beta(1, n)) or M_k/k (Beta(n, 1))."""
    if not 0 <= x <= 1:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if which == "min":
        return 1 - (1 - x) ** n
    if which == "max":
        return x ** n
    raise ValueError(f"which must be 'min' or 'max', got {which!r}")


def minmax_limit_moments(n: int) -> dict:
    """Limit means of m_k/k, M_k/k, (M_k - m_k)/k and the common standard deviation."""
    _check_positive(n=n)
    return {
        "mean_min": 1 / (n + 1),
        "mean_max": n / (n + 1),
        "mean_range": (n - 1) / (n + 1),
        "sd": math.sqrt(n / (n + 2)) / (n + 1),
    }


FIDI_KINDS = ("single", "cond_detached", "cond_given_not", "joint")


def fidi_limit_value(c: float, d: float | None = None, kind: str = "single") -> float:
    """n -> infinity limits of detachment probabilities at times c n^2 (and d n^2)."""
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    if kind == "single":
        return math.exp(-1 / (2 * c))
    if kind not in FIDI_KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {FIDI_KINDS}")
    if d is None or not d > c:
        raise ValueError(f"two-time limits need 0 < c < d, got c={c}, d={d}")
    hop = (d - c) / (2 * d * d)
    if kind == "cond_detached":
        return math.exp(-hop)
    if kind == "joint":
        return math.exp(-1 / (2 * c) - hop)
    return (math.exp(-1 / (2 * d)) - math.exp(-1 / (2 * c) - hop)) / -math.expm1(-1 / (2 * c))
