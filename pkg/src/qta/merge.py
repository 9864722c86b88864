"""Greedy recursive merging of cluster subtours into one Hamiltonian cycle.

Starting from an initial cluster, one internal arc ``(v_m, v_n)`` is broken:
``v_n`` becomes the orphan that the final edge returns to and ``v_m`` is
bridged to the nearest city ``v_s`` of a not-yet-visited cluster.  Inside
that cluster both internal arcs at ``v_s`` are tried in turn: dropping arc
``(v_s, v_t)`` walks the cluster from ``v_s`` to ``v_t``, and ``v_t`` is
bridged onwards.  Once every cluster is linked, ``v_t`` closes the cycle to
``v_n``.  All root-to-leaf paths of this tree are complete tours and the
shortest one wins.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .clustering import MIN_CLUSTER_SIZE
from .instances import Instance, canonical_tour, tour_cost
from .qubo import SubTour

REL_TOL = 1e-9


class MergeError(ValueError):
    pass


@dataclass
class MergeState:
    linked: frozenset
    route: list
    current_exit: int
    ending_node: int
    length: float


@dataclass(frozen=True)
class MergeResult:
    tour: tuple
    cost: float
    n_leaves: int


def _walk(order: Sequence[int], start: int, dropped: int) -> list:
    """Cycle ``order`` opened at arc ``(start, dropped)``, walked from ``start`` to ``dropped``."""
    n = len(order)
    k = order.index(start)
    if order[(k + 1) % n] == dropped:
        return [order[(k - i) % n] for i in range(n)]
    if order[(k - 1) % n] != dropped:
        raise MergeError(f"({start}, {dropped}) is not an arc of the subtour")
    return [order[(k + i) % n] for i in range(n)]


def _check(inst: Instance, subtours: Sequence[SubTour]):
    if not subtours:
        raise MergeError("nothing to merge")
    seen = set()
    for st in subtours:
        if len(st.order) < MIN_CLUSTER_SIZE:
            raise MergeError(f"subtour {st.order} has fewer than {MIN_CLUSTER_SIZE} cities")
        if seen & set(st.order):
            raise MergeError("subtours overlap")
        seen |= set(st.order)
    if seen != set(range(inst.n_cities)):
        raise MergeError("subtours do not cover every city")


class _Tree:
    def __init__(self, inst: Instance, subtours: Sequence[SubTour]):
        self.inst = inst
        self.subtours = [tuple(int(c) for c in st.order) for st in subtours]
        self.owner = np.empty(inst.n_cities, dtype=np.int64)
        for k, order in enumerate(self.subtours):
            self.owner[list(order)] = k
        self.n_clusters = len(self.subtours)
        self.cycle_len = [float(tour_cost(inst, o)) for o in self.subtours]

    def nearest_unlinked(self, city: int, linked: frozenset) -> int:
        d = self.inst.dist[city]
        mask = ~np.isin(self.owner, list(linked))
        candidates = np.flatnonzero(mask)
        # argmin returns the first minimum, i.e. the lowest city index on ties
        return int(candidates[np.argmin(d[candidates])])

    def start(self, k: int) -> Iterator[MergeState]:
        order = self.subtours[k]
        n = len(order)
        for i in range(n):
            a, b = order[i], order[(i + 1) % n]
            for vm, vn in ((a, b), (b, a)):
                path = _walk(order, vn, vm)
                yield MergeState(frozenset([k]), path, vm, vn,
                                 self.cycle_len[k] - self.inst.dist[vm, vn])

    def link_to_cluster(self, state: MergeState) -> Iterator[MergeState]:
        if len(state.linked) == self.n_clusters:
            state.length += self.inst.dist[state.current_exit, state.ending_node]
            yield state
            return
        vs = self.nearest_unlinked(state.current_exit, state.linked)
        bridge = self.inst.dist[state.current_exit, vs]
        yield from self.recurse_cluster(state, vs, bridge)

    def recurse_cluster(self, state: MergeState, vs: int, bridge: float) -> Iterator[MergeState]:
        k = int(self.owner[vs])
        order = self.subtours[k]
        n = len(order)
        i = order.index(vs)
        for vt in (order[(i + 1) % n], order[(i - 1) % n]):
            path = _walk(order, vs, vt)
            child = MergeState(
                state.linked | {k},
                state.route + path,
                vt,
                state.ending_node,
                state.length + bridge + self.cycle_len[k] - self.inst.dist[vs, vt],
            )
            yield from self.link_to_cluster(child)


def leaves(inst: Instance, subtours: Sequence[SubTour], initial: Optional[Sequence[int]] = None
           ) -> Iterator[tuple]:
    """Yield ``(route, length)`` for every root-to-leaf path, starting from each initial cluster."""
    _check(inst, subtours)
    tree = _Tree(inst, subtours)
    starts = range(tree.n_clusters) if initial is None else initial
    for k in starts:
        for root in tree.start(k):
            for leaf in tree.link_to_cluster(root):
                yield leaf.route, float(leaf.length)


def merge(inst: Instance, subtours: Sequence[SubTour], initial: str = "all", rng=None) -> MergeResult:
    """Shortest tour in the merge tree.

    ``initial="all"`` sweeps every cluster as the starting one; ``"random"``
    draws one starting cluster from ``rng``.  Equal lengths are resolved by
    the lexicographically smallest canonical tour.
    """
    _check(inst, subtours)
    if len(subtours) == 1:
        order = tuple(int(c) for c in subtours[0].order)
        return MergeResult(order, tour_cost(inst, order), 1)
    if initial == "all":
        starts = None
    elif initial == "random":
        starts = [int(np.random.default_rng(rng).integers(len(subtours)))]
    else:
        raise ValueError(f"initial must be 'all' or 'random', got {initial!r}")
    best_len = np.inf
    best = None
    count = 0
    for route, length in leaves(inst, subtours, starts):
        count += 1
        tol = REL_TOL * max(1.0, abs(best_len)) if best is not None else 0.0
        if best is None or length < best_len - tol:
            best_len, best = length, canonical_tour(route)
        elif length <= best_len + tol:
            cand = canonical_tour(route)
            if cand < best:
                best = cand
                best_len = min(best_len, length)
    if len(set(best)) != inst.n_cities:
        raise MergeError("merge produced a non-Hamiltonian route")
    return MergeResult(best, tour_cost(inst, best), count)
