"""The outer optimisation loop and the full-QUBO baseline."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .clustering import DEFAULT_MAX_CLUSTER_SIZE, MIN_CLUSTER_SIZE, extract_clusters
from .initializer import InitConfig, random_labeling, run_initializer
from .instances import Instance, tour_cost
from .merge import merge
from .oracle import BudgetExhausted, InfeasibleSampleError, OracleLedger, make_sampler, solve_cluster
from .qubo import Infeasible, build_tsp_qubo, decode

log = logging.getLogger(__name__)

BASELINE_LABEL = "qbsolv-approximation"


class InsufficientBudgetError(ValueError):
    pass


@dataclass
class QtaConfig:
    budget: int = 40
    max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE
    sampler: str = "anneal"
    reads: int = 50
    sweeps: int = 1000
    init: str = "covns"
    init_config: InitConfig = field(default_factory=InitConfig)
    iteration_cap: Optional[int] = None
    restart_after: Optional[int] = None
    merge_initial: str = "all"
    remote_delegate: Optional[Callable] = None

    @property
    def max_iterations(self) -> int:
        return self.iteration_cap if self.iteration_cap is not None else 10 * self.budget


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    phase: str
    cost: Optional[float]
    incumbent_cost: float
    used: int
    hits: int
    accepted: bool


@dataclass
class QtaResult:
    labels: np.ndarray
    tour: tuple
    cost: float
    ledger: OracleLedger
    history: list
    stop_reason: str

    @property
    def accesses(self) -> int:
        return self.ledger.used


def insertion_move(labels, rng=None, max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE) -> np.ndarray:
    """Move one random city to a different random cluster, redrawing moves that break size bounds."""
    rng = np.random.default_rng(rng)
    labels = np.asarray(labels)
    n = len(labels)
    sizes = np.bincount(labels)
    n_clusters = len(sizes) - 1
    if n_clusters < 2:
        return labels.copy()
    for _ in range(n * n_clusters):
        city = int(rng.integers(n))
        src = labels[city]
        target = int(rng.integers(1, n_clusters))
        if target >= src:
            target += 1
        if sizes[src] - 1 < MIN_CLUSTER_SIZE or sizes[target] + 1 > max_cluster_size:
            continue
        out = labels.copy()
        out[city] = target
        return out
    return labels.copy()


class _Evaluator:
    def __init__(self, inst: Instance, config: QtaConfig, ledger: OracleLedger, sampler, merge_rng):
        self.inst = inst
        self.config = config
        self.ledger = ledger
        self.sampler = sampler
        self.merge_rng = merge_rng

    def __call__(self, labels):
        clusters = extract_clusters(labels, self.config.max_cluster_size)
        subtours = [solve_cluster(self.ledger, self.inst, c, self.sampler, self.config.max_cluster_size)
                    for c in clusters]
        merged = merge(self.inst, subtours, self.config.merge_initial, self.merge_rng)
        return merged.tour, tour_cost(self.inst, merged.tour)


def _initial_labelings(inst: Instance, config: QtaConfig, rng) -> list:
    if config.init == "random":
        return [random_labeling(inst, config.max_cluster_size, rng)]
    if config.init == "covns":
        init_cfg = config.init_config
        if init_cfg.max_cluster_size != config.max_cluster_size:
            init_cfg = InitConfig(**{**init_cfg.__dict__, "max_cluster_size": config.max_cluster_size})
        seed = int(rng.integers(2 ** 63))
        return list(run_initializer(inst, init_cfg, seed).values())
    raise ValueError(f"unknown init {config.init!r}")


def run_qta(inst: Instance, config: Optional[QtaConfig] = None, rng_seed: int = 0,
            sampler: Optional[Callable] = None) -> QtaResult:
    """Partition, solve clusters through the metered oracle, merge, perturb; stop when the budget runs out.

    ``sampler`` overrides the one named in ``config`` (used for instrumentation).
    """
    config = config or QtaConfig()
    init_ss, move_ss, sampler_ss, merge_ss = np.random.SeedSequence(rng_seed).spawn(4)
    move_rng = np.random.default_rng(move_ss)
    ledger = OracleLedger(budget=config.budget)
    if sampler is None:
        sampler = make_sampler(config.sampler, config.reads, config.sweeps,
                               int(sampler_ss.generate_state(1)[0]), config.remote_delegate)
    evaluate = _Evaluator(inst, config, ledger, sampler, np.random.default_rng(merge_ss))

    candidates = _initial_labelings(inst, config, np.random.default_rng(init_ss))
    first_c = int(np.max(candidates[0]))
    if config.budget < first_c:
        raise InsufficientBudgetError(
            f"budget {config.budget} cannot cover the {first_c} clusters of the first labeling")

    history = []
    best = None  # (cost, labels, tour)
    stop_reason = "iteration-cap"
    iteration = 0
    try:
        for labels in candidates:
            tour, cost = evaluate(labels)
            accepted = best is None or cost < best[0]
            if accepted:
                best = (cost, labels.copy(), tour)
            history.append(IterationRecord(iteration, "init", cost, best[0], ledger.used,
                                           ledger.hit_count, accepted))
            iteration += 1
        current = best[1].copy()
        stale = 0
        for _ in range(config.max_iterations):
            current = insertion_move(current, move_rng, config.max_cluster_size)
            tour, cost = evaluate(current)
            accepted = cost < best[0]
            if accepted:
                best = (cost, current.copy(), tour)
                stale = 0
            else:
                stale += 1
            history.append(IterationRecord(iteration, "search", cost, best[0], ledger.used,
                                           ledger.hit_count, accepted))
            iteration += 1
            if config.restart_after and stale >= config.restart_after:
                current = best[1].copy()
                stale = 0
    except BudgetExhausted:
        stop_reason = "budget"
        if best is None:
            raise
    log.debug("run finished after %d iterations (%s), cost %.1f", iteration, stop_reason, best[0])
    return QtaResult(best[1], best[2], best[0], ledger, history, stop_reason)


@dataclass
class BaselineConfig:
    max_rounds: int = 1000
    patience: int = 50
    tenure: Optional[int] = None
    iterations_per_var: int = 20
    sub_qubo_size: int = 47


@dataclass
class BaselineResult:
    tour: tuple
    cost: float
    access_equivalent: int
    rounds: int = 0
    label: str = BASELINE_LABEL


def _energy(Q, z) -> float:
    return float(z @ Q @ z)


def _subqubo_pass(Q, sym, z, size, iters, tenure, rng) -> tuple:
    """Re-optimise windows of ``size`` variables, most flip-sensitive first, with the rest clamped.

    Returns the updated state and the number of sub-problems dispatched.
    """
    fields = sym @ z - np.diag(sym) * z
    impact = (1 - 2 * z) * (np.diag(Q) + fields)
    order = np.argsort(impact, kind="stable")
    dispatched = 0
    for lo in range(0, len(order), size):
        idx = np.sort(order[lo:lo + size])
        rest = np.ones(len(z), dtype=bool)
        rest[idx] = False
        sub = Q[np.ix_(idx, idx)].copy()
        sub[np.diag_indices(len(idx))] += sym[np.ix_(idx, rest)] @ z[rest]
        zs, _ = _kernels.tabu_search(np.ascontiguousarray(sub), z[idx].copy(), iters, tenure,
                                     int(rng.integers(2 ** 32)))
        dispatched += 1
        trial = z.copy()
        trial[idx] = zs
        if _energy(Q, trial) <= _energy(Q, z):
            z = trial
    return z, dispatched


def run_baseline(inst: Instance, config: Optional[BaselineConfig] = None, rng_seed: int = 0) -> BaselineResult:
    """Full-problem QUBO solved by decomposition plus bit-flip tabu search.

    A stand-in for QBSolv, not a reimplementation.  Each round runs tabu on the
    whole QUBO, then re-solves sub-QUBOs of ``sub_qubo_size`` variables; every
    sub-QUBO solve counts as one access.  Rounds restart from a perturbed
    incumbent until ``patience`` consecutive rounds fail to improve.
    """
    config = config or BaselineConfig()
    rng = np.random.default_rng(rng_seed)
    q = build_tsp_qubo(inst, range(inst.n_cities), max_cluster_size=inst.n_cities)
    Q = np.ascontiguousarray(q.coeffs)
    sym = Q + Q.T
    n_vars = q.num_vars
    size = min(config.sub_qubo_size, n_vars)
    tenure = config.tenure if config.tenure is not None else max(1, min(20, n_vars // 4))
    sub_tenure = max(1, min(tenure, size // 4))
    iters = config.iterations_per_var * n_vars
    best_z, best_e = None, np.inf
    best_tour = None
    rounds = accesses = stale = 0
    while rounds < config.max_rounds and stale < config.patience:
        if best_z is None:
            z0 = (rng.random(n_vars) < 0.5).astype(np.int8)
        else:
            z0 = best_z.copy()
            flip = rng.random(n_vars) < 0.1
            z0[flip] = 1 - z0[flip]
        z, _ = _kernels.tabu_search(Q, z0, iters, tenure, int(rng.integers(2 ** 32)))
        z, k = _subqubo_pass(Q, sym, z, size, config.iterations_per_var * size, sub_tenure, rng)
        accesses += k
        rounds += 1
        e = _energy(Q, z)
        res = decode(q, z)
        if e < best_e - 1e-9 and not isinstance(res, Infeasible):
            best_z, best_e, best_tour = z, e, res.order
            stale = 0
        else:
            stale += 1
    if best_tour is None:
        raise InfeasibleSampleError(decode(q, z))
    return BaselineResult(tuple(best_tour), tour_cost(inst, best_tour), accesses, rounds)
