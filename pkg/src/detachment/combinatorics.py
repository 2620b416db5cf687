"""Exact and log-domain combinatorial kernels.

Exact quantities are plain ``int`` / ``fractions.Fraction`` values (arbitrary
precision, always in lowest terms).  Log-domain quantities are ``float``
natural logs with ``-inf`` standing for zero.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from numbers import Rational

import numpy as np

__all__ = [
    "falling_factorial",
    "log_falling_ratio",
    "log_falling_ratio_array",
    "StirlingTable",
    "stirling_table",
    "stirling2",
    "stirling_table_by_summation",
    "rennie_dobson_bounds",
    "two_f_zero",
    "two_f_zero_terms",
    "log_two_f_zero",
    "logsumexp",
]


def falling_factorial(a: int, r: int) -> int:
    """a (a-1) ... (a-r+1), with the empty product equal to 1."""
    if r < 0:
        raise ValueError(f"falling factorial needs r >= 0, got r={r}")
    if 0 <= a < r:
        return 0
    out = 1
    for i in range(r):
        out *= a - i
    return out


def log_falling_ratio(k: int, n: int) -> float:
    """log((k)_n / k^n) = sum_{j=1}^{n-1} log(1 - j/k).

    Summed term by term with ``log1p`` and ``math.fsum`` so that the result
    stays accurate when n is close to k (no log-gamma differencing).
    """
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if n > k:
        raise ValueError(f"log_falling_ratio needs n <= k, got n={n}, k={k}")
    return math.fsum(math.log1p(-j / k) for j in range(1, n))


# Series path is used when (n-1)/k is at most this; direct summation otherwise.
_SERIES_MAX_RATIO = 0.25
_DIRECT_CHUNK = 1 << 22


def _power_sum_coefficients(N: int, x_max: float) -> np.ndarray:
    """c_m = (1/m) * sum_{i=1}^N (i/N)^m for m = 1..M, M chosen from x_max."""
    # tail of sum_m x^m Q_m / m with Q_m <= N is below N x^{M+1} / ((M+1)(1-x))
    M = 1
    while N * x_max ** (M + 1) / ((M + 1) * (1 - x_max)) > 1e-18:
        M += 1
    ratios = np.arange(1, N + 1, dtype=float) / N
    coeffs = np.empty(M)
    power = np.ones(N)
    for m in range(1, M + 1):
        power *= ratios
        coeffs[m - 1] = math.fsum(power) / m
    return coeffs


def log_falling_ratio_array(n: int, ks) -> np.ndarray:
    """Vectorised ``log_falling_ratio`` over an array of k values (all k >= n).

    For k >= 4(n-1) the sum is expanded as
    ``-sum_m ((n-1)/k)^m * sum_i (i/(n-1))^m / m`` (all terms of one sign, no
    cancellation, truncated at absolute error 1e-18); smaller k use direct
    ``log1p`` summation.  Agreement with the exact rational value is a test
    obligation.
    """
    ks = np.asarray(ks, dtype=float)
    if ks.size and ks.min() < n:
        raise ValueError("log_falling_ratio_array needs every k >= n")
    out = np.zeros(ks.shape)
    N = n - 1
    if N == 0 or ks.size == 0:
        return out
    x = N / ks
    series = x <= _SERIES_MAX_RATIO
    if series.any():
        coeffs = _power_sum_coefficients(N, float(x[series].max()))
        xs = x[series]
        acc = np.zeros(xs.shape)
        for c in coeffs[::-1]:
            acc = (acc + c) * xs
        out[series] = -acc
    direct = np.flatnonzero(~series)
    if direct.size:
        i = np.arange(1, n, dtype=float)
        rows = max(1, _DIRECT_CHUNK // N)
        for start in range(0, direct.size, rows):
            idx = direct[start:start + rows]
            out[idx] = np.log1p(-i[None, :] / ks[idx, None]).sum(axis=1)
    return out


class StirlingTable:
    """Immutable dense table of Stirling numbers of the second kind.

    ``table[a][b]`` holds S(a, b) for 0 <= a, b <= max_a, built row by row
    from S(a, b) = b S(a-1, b) + S(a-1, b-1).
    """

    __slots__ = ("max_a", "_rows")

    def __init__(self, max_a: int):
        if max_a < 0:
            raise ValueError("max_a must be nonnegative")
        rows = [(1,) + (0,) * max_a]
        for a in range(1, max_a + 1):
            prev = rows[-1]
            row = [0] * (max_a + 1)
            for b in range(1, a + 1):
                row[b] = b * prev[b] + prev[b - 1]
            rows.append(tuple(row))
        self.max_a = max_a
        self._rows = tuple(rows)

    @property
    def max_b(self) -> int:
        return self.max_a

    def __getitem__(self, a: int) -> tuple:
        return self._rows[a]

    def __call__(self, a: int, b: int) -> int:
        if a < 0 or b < 0:
            raise ValueError("Stirling arguments must be nonnegative")
        if b > a:
            return 0
        return self._rows[a][b]


_table_lock = threading.Lock()
_table = StirlingTable(64)


def stirling_table(max_a: int) -> StirlingTable:
    """Shared table covering at least ``max_a``; rebuilt (doubled) on demand."""
    global _table
    table = _table
    if table.max_a >= max_a:
        return table
    with _table_lock:
        if _table.max_a < max_a:
            _table = StirlingTable(max(max_a, 2 * _table.max_a))
        return _table


def stirling2(a: int, b: int) -> int:
    """Stirling number of the second kind S(a, b)."""
    if a < 0 or b < 0:
        raise ValueError("Stirling arguments must be nonnegative")
    if b > a:
        return 0
    return stirling_table(a)(a, b)


def stirling_table_by_summation(max_a: int) -> list[list[int]]:
    """S(a, b) for a, b <= max_a built only from
    S(a+1, b+1) = sum_{j=b}^{a} (b+1)^(a-j) S(j, b), seeded by S(a, 0) = [a == 0].

    Used as an independent check of the triangular recurrence.
    """
    S = [[0] * (max_a + 1) for _ in range(max_a + 1)]
    S[0][0] = 1
    for b in range(max_a):
        for a in range(b, max_a):
            S[a + 1][b + 1] = sum((b + 1) ** (a - j) * S[j][b] for j in range(b, a + 1))
    return S


def rennie_dobson_bounds(a: int, b: int) -> tuple[Fraction, Fraction]:
    """(1/2)(b^2+b+2) b^(a-b-1) - 1 <= S(a, b) <= (1/2) C(a, b) b^(a-b).

    Only valid for 1 <= b < a; on the diagonal both sides miss S(b, b) = 1
    once b >= 3.
    """
    if not 1 <= b < a:
        raise ValueError(f"bounds need 1 <= b < a, got a={a}, b={b}")
    lower = Fraction(b * b + b + 2, 2) * Fraction(b) ** (a - b - 1) - 1
    upper = Fraction(math.comb(a, b) * b ** (a - b), 2)
    return lower, upper


def two_f_zero_terms(n: int, l: int, z):
    """Terms C(n, r) (l)_r z^r, r = 0..min(n, l), of 2F0(-n, -l; ; z)."""
    if n < 0 or l < 0:
        raise ValueError("2F0 parameters must be nonnegative integers")
    term = Fraction(1) if isinstance(z, Rational) else 1.0
    terms = [term]
    for r in range(min(n, l)):
        term = term * (n - r) * (l - r) * z / (r + 1)
        terms.append(term)
    return terms


def two_f_zero(n: int, l: int, z):
    """Terminating series 2F0(-n, -l; ; z) = sum_r C(n, r) (l)_r z^r.

    Rational ``z`` gives an exact ``Fraction``; a float ``z`` is summed in the
    log domain and exponentiated (see ``log_two_f_zero``).
    """
    if isinstance(z, Rational):
        return sum(two_f_zero_terms(n, l, Fraction(z)), Fraction(0))
    return math.exp(log_two_f_zero(n, l, float(z)))


def log_two_f_zero(n: int, l: int, z: float) -> float:
    """log 2F0(-n, -l; ; z) for z > 0 via log-sum-exp over nonnegative terms.

    Log terms are accumulated as a running sum of log ratios, so the absolute
    error in the result is about 4 * min(n, l) * eps * max|log term|.
    """
    if z <= 0:
        raise ValueError("log_two_f_zero needs z > 0")
    r_max = min(n, l)
    if r_max == 0:
        return 0.0
    r = np.arange(r_max, dtype=float)
    steps = np.log(n - r) + np.log(l - r) - np.log(r + 1) + math.log(z)
    log_terms = np.concatenate(([0.0], np.cumsum(steps)))
    return logsumexp(log_terms)


def logsumexp(values) -> float:
    """log(sum(exp(values))) with ``-inf`` for an empty or all-zero input."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return -math.inf
    top = float(values.max())
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(np.exp(values - top)))
