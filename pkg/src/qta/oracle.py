"""Metered sub-QUBO solving: samplers, the access budget and the partition cache.

Every cache miss is one access to the (possibly remote) sampler.  Solved
partitions are remembered by their city content, so a cluster that comes
back in a later iteration is answered for free.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .clustering import DEFAULT_MAX_CLUSTER_SIZE
from .instances import Instance
from .qubo import AUTO, ClusterSizeError, Infeasible, QuboProblem, SubTour, build_tsp_qubo, decode, encode

QUBO_ENUMERATION_LIMIT = 4
PERMUTATION_ENUMERATION_LIMIT = 10


class BudgetExhausted(RuntimeError):
    pass


class InfeasibleSampleError(RuntimeError):
    def __init__(self, report: Infeasible):
        self.report = report
        super().__init__(
            f"sampler returned no feasible tour ({report.n_violations} one-hot violations)")


class NotConfiguredError(RuntimeError):
    pass


def cluster_key(cluster) -> tuple:
    return tuple(sorted(int(c) for c in cluster))


@dataclass
class OracleLedger:
    budget: int = 40
    used: int = 0
    hit_count: int = 0
    miss_count: int = 0
    cache: dict = field(default_factory=dict)

    @property
    def calls(self) -> int:
        return self.hit_count + self.miss_count

    @property
    def remaining(self) -> int:
        return self.budget - self.used

    def hit_rate(self) -> float:
        return self.hit_count / self.calls if self.calls else 0.0


def solve_cluster(ledger: OracleLedger, inst: Instance, cluster, sampler: Callable,
                  max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE, penalty_a=AUTO) -> SubTour:
    key = cluster_key(cluster)
    cached = ledger.cache.get(key)
    if cached is not None:
        ledger.hit_count += 1
        return cached
    if ledger.used >= ledger.budget:
        raise BudgetExhausted(f"access budget of {ledger.budget} exhausted")
    q = build_tsp_qubo(inst, key, penalty_a, max_cluster_size=max_cluster_size)
    ledger.used += 1
    ledger.miss_count += 1
    result = decode(q, sampler(q))
    if isinstance(result, Infeasible):
        # one retry inside the same access, with a stiffer penalty
        q = build_tsp_qubo(inst, key, 2.0 * q.penalty_a, max_cluster_size=max_cluster_size)
        result = decode(q, sampler(q))
        if isinstance(result, Infeasible):
            raise InfeasibleSampleError(result)
    ledger.cache[key] = result
    return result


def brute_force_order(dist: np.ndarray) -> tuple:
    """Optimal cyclic order of ``range(n)`` by enumerating permutations with city 0 fixed."""
    n = len(dist)
    if n > PERMUTATION_ENUMERATION_LIMIT:
        raise ClusterSizeError(f"permutation enumeration limited to {PERMUTATION_ENUMERATION_LIMIT} cities")
    rest = np.array(list(itertools.permutations(range(1, n))), dtype=np.int64)
    perms = np.hstack([np.zeros((len(rest), 1), dtype=np.int64), rest])
    cost = dist[perms, np.roll(perms, -1, axis=1)].sum(axis=1)
    return tuple(int(c) for c in perms[int(np.argmin(cost))])


def _all_bitstrings(n_bits: int) -> np.ndarray:
    k = np.arange(2 ** n_bits, dtype=np.int64)
    return ((k[:, None] >> np.arange(n_bits)) & 1).astype(np.int8)


def sampler_exact(q: QuboProblem) -> np.ndarray:
    """Ground-truth sampler: full QUBO enumeration up to 4 cities, tour enumeration up to 10."""
    if q.n <= QUBO_ENUMERATION_LIMIT:
        zs = _all_bitstrings(q.num_vars)
        return zs[int(np.argmin(q.energies(zs)))].copy()
    if q.n > PERMUTATION_ENUMERATION_LIMIT:
        raise ClusterSizeError(f"exact sampler handles at most {PERMUTATION_ENUMERATION_LIMIT} cities")
    local = brute_force_order(q.dist)
    return encode(q, [q.city_order[v] for v in local])


# Cold end of the schedule as a multiple of the smallest nonzero |Q| entry.
# Below ~1 the walk is frozen for most of the sweep budget; see the README.
T_COLD_FACTOR = 1.0


def anneal_schedule(Q: np.ndarray, sweeps: int, t_cold_factor: float = T_COLD_FACTOR) -> np.ndarray:
    """Inverse temperatures, geometric from max|Q| down to ``t_cold_factor * min|Q|``."""
    mags = np.abs(Q[Q != 0])
    if len(mags) == 0:
        return np.ones(sweeps)
    t_hot = float(mags.max())
    t_cold = t_cold_factor * float(mags.min())
    return 1.0 / np.geomspace(t_hot, min(t_cold, t_hot), sweeps)


def sampler_anneal(q: QuboProblem, reads: int = 50, sweeps: int = 1000, seed: int = 0,
                   t_cold_factor: float = T_COLD_FACTOR) -> np.ndarray:
    """Simulated annealing over single bit flips; lowest-energy state seen across ``reads`` runs."""
    Q = np.ascontiguousarray(q.coeffs if isinstance(q, QuboProblem) else q, dtype=np.float64)
    betas = anneal_schedule(Q, sweeps, t_cold_factor)
    samples, energies = _kernels.anneal(Q, betas, int(reads), int(seed) % (2 ** 32))
    return samples[int(np.argmin(energies))].copy()


class AnnealSampler:
    """Stateful wrapper: call ``k`` uses a seed derived from ``(seed, k)``."""

    def __init__(self, reads: int = 50, sweeps: int = 1000, seed: int = 0,
                 t_cold_factor: float = T_COLD_FACTOR):
        self.reads = reads
        self.sweeps = sweeps
        self.seed = seed
        self.t_cold_factor = t_cold_factor
        self.calls = 0

    def __call__(self, q: QuboProblem) -> np.ndarray:
        s = int(np.random.SeedSequence([int(self.seed), self.calls]).generate_state(1)[0])
        self.calls += 1
        return sampler_anneal(q, self.reads, self.sweeps, s, self.t_cold_factor)


class RemoteSampler:
    """Slot for an external annealer client; forwards to ``delegate``."""

    def __init__(self, delegate: Optional[Callable] = None):
        self.delegate = delegate
        self.calls = 0

    def __call__(self, q: QuboProblem) -> np.ndarray:
        if self.delegate is None:
            raise NotConfiguredError("remote sampler has no delegate configured")
        self.calls += 1
        return np.asarray(self.delegate(q))


def make_sampler(name: str, reads: int = 50, sweeps: int = 1000, seed: int = 0,
                 delegate: Optional[Callable] = None) -> Callable:
    if name == "exact":
        return sampler_exact
    if name == "anneal":
        return AnnealSampler(reads, sweeps, seed)
    if name == "remote":
        return RemoteSampler(delegate)
    raise ValueError(f"unknown sampler {name!r}")


def n_undirected_tours(n: int) -> int:
    return math.factorial(n - 1) // 2
