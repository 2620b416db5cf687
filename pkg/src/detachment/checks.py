"""Exhaustive cross-checks between closed forms and brute-force enumeration,
and the dominance suite.  Each function returns a dict of named verdicts."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import analytics as an
from . import oracle
from .poissonized import BinomialSpec, dominance_cdf_check, najnudel_dominates, poissonian_lonely_dominance


def _single_time_mismatches(n: int, k: int) -> list:
    pmf = oracle.enumerate_single_time(n, k)
    L, N = pmf.marginal(0), pmf.marginal(1)
    bad = []

    def expect(name, got, want):
        if got != want:
            bad.append(f"{name}(n={n}, k={k}): closed form {got} != enumeration {want}")

    expect("pi_detached", an.pi_detached(n, k, exact=True), L.get(n, Fraction(0)))
    m = an.lonely_moments(n, k, exact=True)
    mean = pmf.expect(lambda o: o[0])
    expect("lonely_mean", m.mean, mean)
    expect("lonely_variance", m.variance, pmf.expect(lambda o: o[0] ** 2) - mean**2)
    law = an.lonely_pmf(n, k, exact=True)
    expect("lonely_pmf", {j: p for j, p in enumerate(law) if p}, {j: p for j, p in L.items() if p})
    expect("support_pmf", {r: p for r, p in an.support_pmf(n, k, exact=True).items() if p}, N)
    expect("support_pmf_birth_chain",
           {r: p for r, p in an.support_pmf_birth_chain(n, k, exact=True).items() if p}, N)
    s_mean = pmf.expect(lambda o: o[1])
    expect("support_moments", an.support_moments(n, k, exact=True),
           (s_mean, pmf.expect(lambda o: o[1] ** 2) - s_mean**2))
    if n >= 2:
        for r in range(1, min(n, k) + 1):
            expect(f"support_tail[m={r}]", an.support_tail(n, k, r, exact=True),
                   pmf.prob(lambda o: o[1] >= r))
    return bad


def _two_time_mismatches(n: int, k: int, l: int) -> list:
    law = oracle.enumerate_two_time(n, k, l)
    bad = []

    def expect(name, got, want):
        if got != want:
            bad.append(f"{name}(n={n}, k={k}, l={l}): closed form {got} != enumeration {want}")

    if k >= n:
        expect("joint_detached", an.joint_detached(n, k, l, exact=True), law.joint_detached)
        expect("cond_detached", an.cond_detached(n, k, k + l, exact=True), law.cond_detached)
    else:
        expect("joint_detached", Fraction(0), law.joint_detached)
    if n >= 2 and k + l >= n:
        expect("cond_detached_given_not", an.cond_detached_given_not(n, k, k + l, exact=True),
               law.cond_detached_given_not)
    if l == 1:
        expect("detachment_time_prob", an.detachment_time_prob(n, k + 1, exact=True), law.detachment_time)
    return bad


def _three_time_mismatches(n: int, k1: int, k2: int, k3: int) -> list:
    law = oracle.enumerate_three_time(n, k1, k2, k3)
    bad = []
    if law.triple != an.triple_detached(n, k1, k2, k3, exact=True):
        bad.append(f"triple_detached(n={n}, {k1}, {k2}, {k3})")
    if law.sandwich != an.sandwich_prob(n, k1, k2, k3, exact=True):
        bad.append(f"sandwich_prob(n={n}, {k1}, {k2}, {k3})")
    if law.markov_gap() != 0:
        bad.append(f"markov_gap(n={n}, {k1}, {k2}, {k3})")
    return bad


def oracle_equality(n_max: int = 5, k_max: int = 6, l_max: int = 3, three_time_k_max: int = 5) -> tuple[dict, list]:
    """Rational equality of every closed form against enumeration on the grid."""
    single, two, three = [], [], []
    for n in range(1, n_max + 1):
        for k in range(1, k_max + 1):
            single += _single_time_mismatches(n, k)
            for l in range(1, l_max + 1):
                two += _two_time_mismatches(n, k, l)
    for n in range(1, 4):
        for k1 in range(n, three_time_k_max + 1):
            for k2 in range(k1 + 1, three_time_k_max + 1):
                for k3 in range(k2 + 1, three_time_k_max + 2):
                    three += _three_time_mismatches(n, k1, k2, k3)
    verdicts = {"single_time_exact": not single, "two_time_exact": not two, "three_time_exact": not three}
    return verdicts, single + two + three


def najnudel_grid() -> list:
    """Grid pairs where the criterion and the CDF comparison disagree."""
    probs = [round(0.05 * i, 2) for i in range(1, 20)]
    bad = []
    for m in range(1, 9):
        for n in range(1, 9):
            for q in probs:
                for p in probs:
                    Y, X = BinomialSpec(m, q), BinomialSpec(n, p)
                    if najnudel_dominates(Y, X) != dominance_cdf_check(Y, X):
                        bad.append((m, q, n, p))
    return bad


def random_poissonian_triples(count: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        lam = float(np.exp(rng.uniform(math.log(0.01), math.log(100.0))))
        k1 = int(rng.integers(1, 60))
        k2 = int(rng.integers(k1 + 1, 121))
        yield lam, k1, k2


def toth_dominance_exact(n_max: int = 5, k_max: int = 5) -> list:
    """(n, k) where L_k or N_k fails to be stochastically below its value at k+1."""
    bad = []
    for n in range(1, n_max + 1):
        for k in range(1, k_max + 1):
            lonely_ok, support_ok = oracle.consecutive_dominance(n, k)
            if not (lonely_ok and support_ok):
                bad.append((n, k, lonely_ok, support_ok))
    return bad


def conditional_dominance_exact(n_max: int = 4, k_max: int = 5) -> list:
    """Check L_k | N_k = a below L_k' | N_k' = b for k <= k', a <= b."""
    bad = []
    for n in range(1, n_max + 1):
        laws = {k: oracle.enumerate_single_time(n, k) for k in range(1, k_max + 1)}
        for k in laws:
            for k2 in range(k, k_max + 1):
                ns1 = laws[k].marginal(1)
                ns2 = laws[k2].marginal(1)
                for a in ns1:
                    for b in ns2:
                        if a <= b:
                            lo = laws[k].conditional(0, 1, a)
                            hi = laws[k2].conditional(0, 1, b)
                            if not oracle.cdf_dominated(lo, hi):
                                bad.append((n, k, a, k2, b))
    return bad


def dominance_suite(triples: int = 1000, seed: int = 11) -> tuple[dict, list]:
    grid = najnudel_grid()
    pois = [t for t in random_poissonian_triples(triples, seed) if not poissonian_lonely_dominance(*t)]
    toth = toth_dominance_exact()
    cond = conditional_dominance_exact()
    verdicts = {
        "najnudel_matches_cdf_grid": not grid,
        "poissonian_dominance_random_triples": not pois,
        "toth_dominance_exact_small": not toth,
        "conditional_dominance_exact_small": not cond,
    }
    return verdicts, [("grid", grid), ("poissonian", pois), ("toth", toth), ("conditional", cond)]
