"""Monte Carlo engine for the coupled detachment process.

Two engines share the same transition law:

* ``OccupancyState`` + ``step`` / ``block_step`` / ``run_trajectory``: one
  trajectory with sparse occupancy and O(1) observable updates per move.
  ``run_trajectory`` jumps directly between times at which some passenger
  moves, so its cost is proportional to the number of moves (about
  n log horizon), not to the horizon.
* ``Ensemble``: many replicas at once as an (R, n) integer array, for
  single-time laws over 10^5 replicas.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .analytics import log_tau_cdf

RNG_ALGORITHM = "PCG64DXSM"
WORKERS_ENV = "DETACHMENT_WORKERS"


@dataclass(frozen=True)
class RngStream:
    """Reproducible generator: identical (seed, stream) give identical draws."""

    seed: int
    stream: int = 0
    algorithm: str = RNG_ALGORITHM

    def generator(self) -> np.random.Generator:
        if self.algorithm != RNG_ALGORITHM:
            raise ValueError(f"unsupported generator {self.algorithm!r}")
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64DXSM(seq))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


class Observables(NamedTuple):
    lonely: int
    support: int
    min_bus: int
    max_bus: int
    range: int
    clump: int
    rc: float


@dataclass
class OccupancyState:
    """Configuration at time k.

    ``assignment[i]`` is the bus of passenger i (0-based passengers, buses
    numbered 1..k); ``occupancy`` maps each nonempty bus to its head count.
    ``lonely``, ``support`` and ``clump`` are kept in sync by ``relocate``.
    """

    k: int
    assignment: np.ndarray
    occupancy: dict
    lonely: int
    support: int
    clump: int

    @property
    def n(self) -> int:
        return len(self.assignment)

    def relocate(self, passenger: int, bus: int) -> None:
        old = int(self.assignment[passenger])
        if old == bus:
            return
        c = self.occupancy[old]
        c_new = self.occupancy.get(bus, 0)
        self.clump += 2 * (c_new - c) + 2
        if c == 1:
            self.lonely -= 1
            self.support -= 1
            del self.occupancy[old]
        else:
            if c == 2:
                self.lonely += 1
            self.occupancy[old] = c - 1
        if c_new == 0:
            self.lonely += 1
            self.support += 1
        elif c_new == 1:
            self.lonely -= 1
        self.occupancy[bus] = c_new + 1
        self.assignment[passenger] = bus

    def copy(self) -> "OccupancyState":
        return OccupancyState(self.k, self.assignment.copy(), dict(self.occupancy),
                              self.lonely, self.support, self.clump)

    def check(self) -> None:
        """Recompute every cached quantity from ``assignment`` and compare."""
        buses, counts = np.unique(self.assignment, return_counts=True)
        assert dict(zip(buses.tolist(), counts.tolist())) == self.occupancy
        assert counts.sum() == self.n
        assert buses.min() >= 1 and buses.max() <= self.k
        assert self.support == len(buses)
        assert self.lonely == int((counts == 1).sum())
        assert self.clump == int((counts ** 2).sum())


def init_state(n: int) -> OccupancyState:
    """All n passengers in bus 1 at time 1."""
    if n < 1:
        raise ValueError(f"need at least one passenger, got n={n}")
    return OccupancyState(k=1, assignment=np.ones(n, dtype=np.int64), occupancy={1: n},
                          lonely=int(n == 1), support=1, clump=n * n)


def _move_subset(state: OccupancyState, count: int, rng, new_buses) -> None:
    if count == 0:
        return
    movers = rng.choice(state.n, size=count, replace=False) if count < state.n else np.arange(state.n)
    if np.isscalar(new_buses):
        for p in movers.tolist():
            state.relocate(p, new_buses)
    else:
        for p, b in zip(movers.tolist(), new_buses.tolist()):
            state.relocate(p, b)


def step(state: OccupancyState, rng) -> OccupancyState:
    """Advance from time k-1 to k: each passenger moves to bus k w.p. 1/k.

    The mover set is a Binomial(n, 1/k) count followed by a uniform subset.
    Mutates and returns ``state``.
    """
    rng = as_generator(rng)
    state.k += 1
    k = state.k
    count = int(rng.binomial(state.n, 1 / k))
    _move_subset(state, count, rng, k)
    return state


def block_step(state: OccupancyState, l: int, rng) -> OccupancyState:
    """Advance from time k to k + l in one draw.

    Each passenger stays with probability k/(k+l), otherwise joins a uniform
    bus among k+1..k+l.  Same law as l calls of ``step``.
    """
    if l < 1:
        raise ValueError(f"block_step needs l >= 1, got {l}")
    rng = as_generator(rng)
    k = state.k
    count = int(rng.binomial(state.n, l / (k + l)))
    state.k = k + l
    _move_subset(state, count, rng, rng.integers(k + 1, k + l + 1, size=count))
    return state


def observables(state: OccupancyState) -> Observables:
    lo = min(state.occupancy)
    hi = max(state.occupancy)
    return Observables(state.lonely, state.support, lo, hi, hi - lo, state.clump,
                       math.log(state.clump / state.n))


def _next_move_time(k: int, n: int, rng) -> float:
    # P(no passenger moves during k+1..j) = prod (1 - 1/i)^n = (k/j)^n
    u = 1.0 - rng.random()
    return math.floor(k * math.exp(-math.log(u) / n)) + 1


def _binomial_at_least_one(n: int, p: float, rng) -> int:
    """Binomial(n, p) conditioned on being positive."""
    p_zero = math.exp(n * math.log1p(-p))
    if p_zero < 0.5:
        while True:
            x = int(rng.binomial(n, p))
            if x:
                return x
    positive = -math.expm1(n * math.log1p(-p))
    u = rng.random() * positive
    term = n * p * math.exp((n - 1) * math.log1p(-p))
    m, acc = 1, term
    while acc < u and m < n:
        term *= (n - m) / (m + 1) * p / (1 - p)
        m += 1
        acc += term
    return m


class Sample(NamedTuple):
    time: int
    lonely: int
    support: int
    min_bus: int
    max_bus: int
    clump: int
    rc: float


@dataclass
class TrajectoryRecord:
    n: int
    seed: int | None
    stream: int | None
    horizon: int
    first_detachment: int | None = None
    last_detachment_seen: int | None = None
    detachment_state_count: int = 0
    sampled_series: list = field(default_factory=list)
    censored: bool = True
    stopped_early: bool = False

    def sample_at(self, time: int) -> Sample:
        for s in self.sampled_series:
            if s.time == time:
                return s
        raise KeyError(f"time {time} was not sampled")


def run_trajectory(n: int, horizon: int, sample_times=(), rng=0,
                   stop_at_first_detachment: bool = False) -> TrajectoryRecord:
    """Simulate times 1..horizon and record detachment statistics.

    ``first_detachment`` is the least k with L_k = n; ``last_detachment_seen``
    the last detachment time (L_{k-1} < n = L_k) up to the horizon;
    ``detachment_state_count`` the number of k <= horizon with L_k = n.
    With ``stop_at_first_detachment`` the run ends at the first detachment and
    the count fields only cover the simulated stretch.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    times = sorted(set(int(t) for t in sample_times))
    if times and (times[0] < 1 or times[-1] > horizon):
        raise ValueError("sample times must lie in [1, horizon]")
    seed = stream = None
    if isinstance(rng, RngStream):
        seed, stream = rng.seed, rng.stream
    gen = as_generator(rng)
    state = init_state(n)
    record = TrajectoryRecord(n=n, seed=seed, stream=stream, horizon=horizon)
    ti = 0
    k = 1
    while True:
        nxt = min(_next_move_time(k, n, gen), horizon + 1)
        # state is frozen on [k, nxt - 1]
        while ti < len(times) and times[ti] < nxt:
            obs = observables(state)
            record.sampled_series.append(
                Sample(times[ti], obs.lonely, obs.support, obs.min_bus, obs.max_bus, obs.clump, obs.rc))
            ti += 1
        if state.lonely == n:
            if record.first_detachment is None:
                record.first_detachment = k
                record.censored = False
                if stop_at_first_detachment:
                    record.detachment_state_count += 1
                    record.stopped_early = True
                    return record
            record.detachment_state_count += nxt - k
        if nxt > horizon:
            return record
        was_detached = state.lonely == n
        state.k = nxt
        _move_subset(state, _binomial_at_least_one(n, 1 / nxt, gen), gen, nxt)
        if state.lonely == n and not was_detached:
            record.last_detachment_seen = nxt
        k = nxt


def run_coupled_first_detachments(n_max: int, horizon: int, rng) -> list:
    """First detachment times of the nested processes n = 1..n_max driven by
    one shared set of moves (passenger i belongs to every process with n > i).

    Returns a list indexed by n - 1; ``None`` marks censoring at the horizon.
    """
    gen = as_generator(rng)
    assignment = np.ones(n_max, dtype=np.int64)
    first: list = [None] * n_max
    first[0] = 1
    k = 1
    while True:
        nxt = _next_move_time(k, n_max, gen)
        if nxt > horizon:
            return first
        count = _binomial_at_least_one(n_max, 1 / nxt, gen)
        assignment[gen.choice(n_max, size=count, replace=False)] = nxt
        k = nxt
        for n in range(2, n_max + 1):
            if first[n - 1] is None:
                if len(np.unique(assignment[:n])) == n:
                    first[n - 1] = k
                else:
                    # a larger prefix cannot be detached if this one is not
                    break


def sample_tau_exact(n: int, rng, size: int | None = None):
    """Draw the permanent detachment time from its distribution function
    C(k, n)/C(k+n-1, n) by inversion: exponential search for an upper
    bracket, then bisection for the least k with F(k) >= u."""
    gen = as_generator(rng)
    if size is not None:
        return np.array([sample_tau_exact(n, gen) for _ in range(size)], dtype=np.int64)
    if n == 1:
        return 1
    log_u = math.log(1.0 - gen.random())
    lo, hi = n - 1, n
    while log_tau_cdf(n, hi) < log_u:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if log_tau_cdf(n, mid) >= log_u:
            hi = mid
        else:
            lo = mid
    return hi


class Ensemble:
    """R independent copies of the n-passenger process as an (R, n) array."""

    def __init__(self, n: int, replicas: int, rng):
        self.rng = as_generator(rng)
        self.k = 1
        self.assignment = np.ones((replicas, n), dtype=np.int64)

    @property
    def n(self) -> int:
        return self.assignment.shape[1]

    def step(self) -> "Ensemble":
        self.k += 1
        movers = self.rng.random(self.assignment.shape) < 1 / self.k
        self.assignment[movers] = self.k
        return self

    def block_step(self, l: int) -> "Ensemble":
        if l < 1:
            raise ValueError(f"block_step needs l >= 1, got {l}")
        k = self.k
        movers = self.rng.random(self.assignment.shape) < l / (k + l)
        self.assignment[movers] = self.rng.integers(k + 1, k + l + 1, size=int(movers.sum()))
        self.k = k + l
        return self

    def advance_to(self, k: int) -> "Ensemble":
        if k > self.k:
            self.block_step(k - self.k)
        return self

    def observables(self) -> dict:
        """Per-replica L, N, min_bus, max_bus, clump and rc as arrays."""
        return batch_observables(self.assignment)


def batch_observables(assignment: np.ndarray) -> dict:
    a = np.sort(assignment, axis=1)
    R, n = a.shape
    new_run = np.ones((R, n), dtype=bool)
    new_run[:, 1:] = a[:, 1:] != a[:, :-1]
    ends_run = np.ones((R, n), dtype=bool)
    ends_run[:, :-1] = new_run[:, 1:]
    lonely = (new_run & ends_run).sum(axis=1)
    support = new_run.sum(axis=1)
    run_id = np.cumsum(new_run, axis=1) - 1 + (np.arange(R) * n)[:, None]
    sizes = np.bincount(run_id.ravel(), minlength=R * n).reshape(R, n)
    clump = (sizes.astype(np.int64) ** 2).sum(axis=1)
    return {
        "lonely": lonely,
        "support": support,
        "min_bus": a[:, 0],
        "max_bus": a[:, -1],
        "clump": clump,
        "rc": np.log(clump / n),
    }


def ensemble_observables(n: int, k: int, replicas: int, seed: int,
                         max_cells: int = 1 << 24) -> dict:
    """Observables at time k for ``replicas`` independent copies, simulated in
    chunks of at most ``max_cells`` passenger slots; chunk i uses stream i."""
    rows = max(1, max_cells // n)
    parts = []
    for i, start in enumerate(range(0, replicas, rows)):
        ens = Ensemble(n, min(rows, replicas - start), RngStream(seed, i))
        parts.append(ens.advance_to(k).observables())
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def sample_occupancy_counts(n: int, k: int, replicas: int, rng, chunk: int = 2000):
    """Yield (rows, k) arrays of bus head counts at time k, whose law is
    Multinomial(n; 1/k, ..., 1/k)."""
    gen = as_generator(rng)
    p = np.full(k, 1 / k)
    # law of the counts at time k does not depend on the path taken
    done = 0
    while done < replicas:
        rows = min(chunk, replicas - done)
        yield gen.multinomial(n, p, size=rows)
        done += rows


# -- replica driver ------------------------------------------------------------


def worker_count() -> int:
    value = os.environ.get(WORKERS_ENV)
    return max(1, int(value)) if value else (os.cpu_count() or 1)


def _replica(args):
    n, horizon, sample_times, seed, stream, stop = args
    return run_trajectory(n, horizon, sample_times, RngStream(seed, stream), stop)


def run_replicas(n: int, horizon: int, replicas: int, seed: int, sample_times=(),
                 stop_at_first_detachment: bool = False, workers: int | None = None) -> list:
    """Independent trajectories on streams 0..replicas-1, returned in stream
    order so results do not depend on the worker count."""
    jobs = [(n, horizon, tuple(sample_times), seed, i, stop_at_first_detachment) for i in range(replicas)]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or replicas < 64:
        return [_replica(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_replica, jobs, chunksize=max(1, replicas // (8 * workers))))


Estimand = Callable[[TrajectoryRecord], float]


def detached_at(k: int) -> Estimand:
    """Indicator of L_k = n; needs k among the sample times."""
    def value(rec: TrajectoryRecord) -> float:
        return float(rec.sample_at(k).lonely == rec.n)
    value.sample_time = k
    return value


def observable_at(k: int, name: str, scale: str | None = None) -> Estimand:
    """Sampled observable at time k, optionally divided by n (``scale='n'``)."""
    def value(rec: TrajectoryRecord) -> float:
        v = getattr(rec.sample_at(k), name)
        return v / rec.n if scale == "n" else float(v)
    value.sample_time = k
    return value


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    replicas: int
    censored_fraction: float = 0.0


def mc_estimate(n: int, horizon: int, replicas: int, estimand, seed: int,
                sample_times=(), stop_at_first_detachment: bool = False,
                workers: int | None = None) -> MCEstimate:
    """Sample mean and standard error of an estimand over independent replicas.

    ``estimand`` is a TrajectoryRecord field name or a callable.  For
    ``first_detachment`` a censored replica contributes ``horizon + 1`` (so the
    mean is a lower bound) and the censored fraction is reported.
    """
    if replicas < 2:
        raise ValueError("mc_estimate needs at least 2 replicas")
    times = set(sample_times)
    if callable(estimand) and hasattr(estimand, "sample_time"):
        times.add(estimand.sample_time)
    records = run_replicas(n, horizon, replicas, seed, sorted(times), stop_at_first_detachment, workers)
    censored = 0
    values = np.empty(replicas)
    for i, rec in enumerate(records):
        if estimand == "first_detachment":
            if rec.censored:
                censored += 1
                values[i] = horizon + 1
            else:
                values[i] = rec.first_detachment
        elif callable(estimand):
            values[i] = estimand(rec)
        else:
            v = getattr(rec, estimand)
            if v is None:
                raise ValueError(f"replica {i} has no value for {estimand!r}")
            values[i] = v
    return MCEstimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(replicas)),
                      replicas, censored / replicas)
