"""Multiform coevolutionary VNS that proposes one partition per clustering metric.

Three subpopulations evolve side by side, each optimising the same label
vectors under a different quality index, and periodically pass their best
individual around a ring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .clustering import (
    DEFAULT_MAX_CLUSTER_SIZE,
    MIN_CLUSTER_SIZE,
    Metric,
    MetricEvaluator,
    canonical_labels,
)
from .instances import DegenerateInstanceError, Instance

METRICS = (Metric.MODULARITY, Metric.DAVIES_BOULDIN, Metric.CALINSKI_HARABASZ)


class InfeasiblePartitionError(ValueError):
    pass


@dataclass
class InitConfig:
    population_size: int = 10
    generations: int = 50
    migration_period: int = 10
    max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE
    max_move_tries: int = 20


@dataclass
class Subpopulation:
    metric: Metric
    individuals: list
    scores: list
    best: np.ndarray = field(default=None)
    best_score: float = float("-inf")

    def __post_init__(self):
        if self.best is None and self.individuals:
            self.refresh_best()

    def refresh_best(self):
        k = int(np.argmax(self.scores))
        if self.best is None or self.scores[k] > self.best_score:
            self.best = self.individuals[k].copy()
            self.best_score = self.scores[k]

    def worst_index(self) -> int:
        return int(np.argmin(self.scores))

    @property
    def best_raw(self) -> float:
        """Best score in the metric's own orientation."""
        return self.best_score if self.metric.maximize else -self.best_score


def cluster_count_range(n: int, max_cluster_size: int) -> tuple:
    lo = math.ceil(n / max_cluster_size)
    hi = n // MIN_CLUSTER_SIZE
    return lo, hi


def random_labeling(inst, max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE, rng=None,
                    n_clusters: Optional[int] = None) -> np.ndarray:
    """Uniform cluster count, three seed cities per cluster, rest spread over non-full clusters.

    ``inst`` may be an Instance or a plain city count.
    """
    n = inst.n_cities if isinstance(inst, Instance) else int(inst)
    if n < MIN_CLUSTER_SIZE:
        raise DegenerateInstanceError(f"need at least {MIN_CLUSTER_SIZE} cities")
    if max_cluster_size < MIN_CLUSTER_SIZE:
        raise InfeasiblePartitionError(f"max_cluster_size must be >= {MIN_CLUSTER_SIZE}")
    rng = np.random.default_rng(rng)
    lo, hi = cluster_count_range(n, max_cluster_size)
    if n_clusters is None:
        if lo > hi:
            raise InfeasiblePartitionError(f"no feasible cluster count for N={n}")
        n_clusters = int(rng.integers(lo, hi + 1))
    elif not lo <= n_clusters <= hi:
        raise InfeasiblePartitionError(f"C={n_clusters} outside feasible range [{lo}, {hi}]")

    order = rng.permutation(n)
    labels = np.zeros(n, dtype=np.int64)
    sizes = np.zeros(n_clusters + 1, dtype=np.int64)
    for k, city in enumerate(order[: MIN_CLUSTER_SIZE * n_clusters]):
        c = k // MIN_CLUSTER_SIZE + 1
        labels[city] = c
        sizes[c] += 1
    for city in order[MIN_CLUSTER_SIZE * n_clusters:]:
        open_ = np.flatnonzero(sizes[1:] < max_cluster_size) + 1
        c = int(rng.choice(open_))
        labels[city] = c
        sizes[c] += 1
    return labels


def _sizes(labels) -> np.ndarray:
    return np.bincount(labels)


def _relabel_move(labels, rng, max_size):
    sizes = _sizes(labels)
    n_clusters = len(sizes) - 1
    if n_clusters < 2:
        return None
    city = int(rng.integers(len(labels)))
    src = labels[city]
    target = int(rng.integers(1, n_clusters))
    if target >= src:
        target += 1
    if sizes[src] <= MIN_CLUSTER_SIZE or sizes[target] >= max_size:
        return None
    out = labels.copy()
    out[city] = target
    return out


def _swap_move(labels, rng, max_size):
    i, j = rng.choice(len(labels), size=2, replace=False)
    if labels[i] == labels[j]:
        return None
    out = labels.copy()
    out[i], out[j] = labels[j], labels[i]
    return out


def _split_merge_move(labels, rng, max_size, coords):
    sizes = _sizes(labels)
    n_clusters = len(sizes) - 1
    c = int(rng.integers(1, n_clusters + 1))
    if rng.random() < 0.5:
        if sizes[c] < 2 * MIN_CLUSTER_SIZE:
            return None
        members = np.flatnonzero(labels == c)
        k = int(rng.integers(MIN_CLUSTER_SIZE, len(members) - MIN_CLUSTER_SIZE + 1))
        moved = rng.choice(members, size=k, replace=False)
        out = labels.copy()
        out[moved] = n_clusters + 1
        return canonical_labels(out)
    if n_clusters < 2:
        return None
    centroids = np.array([coords[labels == q].mean(axis=0) for q in range(1, n_clusters + 1)])
    d = np.linalg.norm(centroids - centroids[c - 1], axis=1)
    d[c - 1] = np.inf
    other = int(np.argmin(d)) + 1
    if sizes[c] + sizes[other] > max_size:
        return None
    out = labels.copy()
    out[out == other] = c
    return canonical_labels(out)


def shake(labels, k: int, rng, inst: Instance, max_size: int, tries: int = 20):
    for _ in range(tries):
        if k == 1:
            out = _relabel_move(labels, rng, max_size)
        elif k == 2:
            out = _swap_move(labels, rng, max_size)
        elif k == 3:
            out = _split_merge_move(labels, rng, max_size, inst.coords)
        else:
            raise ValueError(f"neighborhood index must be 1, 2 or 3, got {k}")
        if out is not None:
            return out
    return labels


def local_search(labels, score: float, evaluator: MetricEvaluator, rng, max_size: int):
    """First-improvement descent over single-city relabel moves."""
    labels = labels.copy()
    improved = True
    while improved:
        improved = False
        sizes = _sizes(labels)
        n_clusters = len(sizes) - 1
        for city in rng.permutation(len(labels)):
            src = labels[city]
            if sizes[src] <= MIN_CLUSTER_SIZE:
                continue
            for target in rng.permutation(np.arange(1, n_clusters + 1)):
                if target == src or sizes[target] >= max_size:
                    continue
                labels[city] = target
                s = evaluator.score(labels)
                if s > score:
                    score = s
                    sizes[src] -= 1
                    sizes[target] += 1
                    improved = True
                    break
                labels[city] = src
            if improved:
                break
    return labels, score


def vns_step(sub: Subpopulation, inst: Instance, neighborhood_index: int, rng,
             config: Optional[InitConfig] = None, evaluator: Optional[MetricEvaluator] = None,
             hook: Optional[Callable] = None) -> Subpopulation:
    """Shake every individual in neighborhood k, descend, keep the result only if it is better."""
    config = config or InitConfig()
    evaluator = evaluator or MetricEvaluator(inst, sub.metric)
    for i, ind in enumerate(sub.individuals):
        cand = shake(ind, neighborhood_index, rng, inst, config.max_cluster_size,
                     config.max_move_tries)
        cand_score = evaluator.score(cand)
        cand, cand_score = local_search(cand, cand_score, evaluator, rng, config.max_cluster_size)
        if cand_score > sub.scores[i]:
            sub.individuals[i] = cand
            sub.scores[i] = cand_score
            if hook is not None:
                hook(sub.metric, cand)
    sub.refresh_best()
    return sub


def migrate(subs: list, rng=None, evaluators: Optional[dict] = None) -> list:
    """Ring migration: each incumbent replaces the worst individual of the next subpopulation."""
    if len(subs) < 2:
        return subs
    outgoing = [s.best.copy() for s in subs]
    for i, migrant in enumerate(outgoing):
        dest = subs[(i + 1) % len(subs)]
        ev = evaluators[dest.metric] if evaluators else None
        if ev is None:
            raise ValueError("migrate needs an evaluator for every destination metric")
        w = dest.worst_index()
        dest.individuals[w] = migrant
        dest.scores[w] = ev.score(migrant)
        dest.refresh_best()
    return subs


def init_subpopulation(inst: Instance, metric: Metric, config: InitConfig, rng,
                       evaluator: MetricEvaluator) -> Subpopulation:
    inds = [random_labeling(inst, config.max_cluster_size, rng) for _ in range(config.population_size)]
    return Subpopulation(metric, inds, [evaluator.score(x) for x in inds])


def run_initializer(inst: Instance, config: Optional[InitConfig] = None, rng_seed=0,
                    hook: Optional[Callable] = None) -> dict:
    """Return the incumbent labeling of each metric's subpopulation, keyed by Metric."""
    config = config or InitConfig()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(rng_seed).spawn(len(METRICS))]
    evaluators = {m: MetricEvaluator(inst, m) for m in METRICS}
    subs = [init_subpopulation(inst, m, config, r, evaluators[m]) for m, r in zip(METRICS, streams)]
    if hook is not None:
        for s in subs:
            for ind in s.individuals:
                hook(s.metric, ind)
    ks = [1] * len(subs)
    for gen in range(1, config.generations + 1):
        for j, (sub, r) in enumerate(zip(subs, streams)):
            before = sub.best_score
            vns_step(sub, inst, ks[j], r, config, evaluators[sub.metric], hook)
            ks[j] = 1 if sub.best_score > before else ks[j] % 3 + 1
        if config.migration_period and gen % config.migration_period == 0:
            migrate(subs, None, evaluators)
    return {s.metric: s.best.copy() for s in subs}
