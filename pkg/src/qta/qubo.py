"""Position-encoded TSP QUBO for a single cluster, plus decoding and Ising conversion.

Variable ``v * n + p`` is 1 when the v-th city of ``city_order`` sits at
tour position ``p``.  The Hamiltonian

    A * sum_v (1 - sum_p x_vp)^2 + A * sum_p (1 - sum_v x_vp)^2
      + B * sum_{v != w} d_vw * sum_p x_vp * x_w(p+1)

is folded into an upper-triangular matrix; the constant ``2 n A`` drops out
and is kept as ``offset = -2 n A`` so that for a feasible assignment
``z @ Q @ z == B * tour_cost + offset``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .clustering import DEFAULT_MAX_CLUSTER_SIZE, MIN_CLUSTER_SIZE
from .instances import Instance

AUTO = "auto"


class ClusterSizeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuboProblem:
    coeffs: np.ndarray
    city_order: tuple
    dist: np.ndarray
    penalty_a: float
    scale_b: float
    offset: float

    @property
    def n(self) -> int:
        return len(self.city_order)

    @property
    def num_vars(self) -> int:
        return self.n * self.n

    def energy(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(z @ self.coeffs @ z)

    def energies(self, zs: np.ndarray) -> np.ndarray:
        """Row-wise energies of a (k, num_vars) 0/1 array."""
        zs = np.asarray(zs, dtype=float)
        return np.einsum("ki,ij,kj->k", zs, self.coeffs, zs)


@dataclass(frozen=True)
class SubTour:
    """Closed tour over one cluster's cities."""
    order: tuple
    cost: float

    @property
    def cluster(self) -> frozenset:
        return frozenset(self.order)

    @property
    def arcs(self) -> list:
        n = len(self.order)
        return [(self.order[i], self.order[(i + 1) % n]) for i in range(n)]

    def __len__(self):
        return len(self.order)


@dataclass(frozen=True)
class Infeasible:
    """Decode failure: which rows (cities) and columns (positions) are not one-hot."""
    bad_cities: tuple
    bad_positions: tuple

    @property
    def n_violations(self) -> int:
        return len(self.bad_cities) + len(self.bad_positions)


@dataclass(frozen=True, eq=False)
class IsingProblem:
    h: np.ndarray
    J: dict
    offset: float

    def energy(self, spins) -> float:
        s = np.asarray(spins, dtype=float)
        e = float(self.h @ s) + self.offset
        for (i, j), v in self.J.items():
            e += v * s[i] * s[j]
        return e


def build_tsp_qubo(inst: Instance, cluster: Sequence[int], penalty_a: Union[float, str] = AUTO,
                   scale_b: float = 1.0,
                   max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE) -> QuboProblem:
    order = tuple(int(c) for c in cluster)
    n = len(order)
    if len(set(order)) != n:
        raise ClusterSizeError("cluster repeats a city")
    if not MIN_CLUSTER_SIZE <= n <= max_cluster_size:
        raise ClusterSizeError(f"cluster size {n} outside [{MIN_CLUSTER_SIZE}, {max_cluster_size}]")
    idx = np.asarray(order)
    d = np.array(inst.dist[np.ix_(idx, idx)], dtype=float)
    max_d = float(d.max())
    floor_a = 2.0 * scale_b * max_d
    if penalty_a == AUTO:
        a = floor_a
    else:
        a = float(penalty_a)
        if a < floor_a:
            raise ValueError(f"penalty_a={a} below 2*B*max_d={floor_a}")
    return QuboProblem(_fold(d, a, scale_b), order, d, a, float(scale_b), -2.0 * n * a)


def _fold(d: np.ndarray, a: float, b: float) -> np.ndarray:
    n = len(d)
    full = np.zeros((n * n, n * n))
    var = np.arange(n * n).reshape(n, n)
    # both one-hot families: -A on each variable, +2A on each pair sharing a row or column
    diag = np.full(n * n, -2.0 * a)
    for line in list(var) + list(var.T):
        for i_pos, i in enumerate(line):
            for j in line[i_pos + 1:]:
                full[min(i, j), max(i, j)] += 2.0 * a
    for v in range(n):
        for w in range(n):
            if v == w:
                continue
            for p in range(n):
                i, j = var[v, p], var[w, (p + 1) % n]
                full[min(i, j), max(i, j)] += b * d[v, w]
    full[np.diag_indices(n * n)] += diag
    return full


def decode(q: QuboProblem, z) -> Union[SubTour, Infeasible]:
    """Return the SubTour a permutation matrix encodes, else an Infeasible report."""
    z = np.asarray(z).astype(np.int64).ravel()
    if len(z) != q.num_vars:
        raise ValueError(f"bitstring length {len(z)} != {q.num_vars}")
    n = q.n
    x = z.reshape(n, n)
    bad_rows = tuple(int(v) for v in np.flatnonzero(x.sum(axis=1) != 1))
    bad_cols = tuple(int(p) for p in np.flatnonzero(x.sum(axis=0) != 1))
    if bad_rows or bad_cols:
        return Infeasible(bad_rows, bad_cols)
    local = np.argmax(x, axis=0)
    order = tuple(q.city_order[v] for v in local)
    cost = float(q.dist[local, np.roll(local, -1)].sum())
    return SubTour(order, cost)


def encode(q: QuboProblem, order: Sequence[int]) -> np.ndarray:
    """Bitstring placing ``order[p]`` at position ``p``."""
    pos = {c: i for i, c in enumerate(q.city_order)}
    if sorted(order) != sorted(q.city_order):
        raise ValueError("order must be a permutation of the cluster")
    z = np.zeros((q.n, q.n), dtype=np.int8)
    for p, c in enumerate(order):
        z[pos[c], p] = 1
    return z.ravel()


def qubo_to_ising(q: Union[QuboProblem, np.ndarray]) -> IsingProblem:
    """Map to spins ``s = 2 z - 1``; ``offset`` makes the two energies equal exactly."""
    Q = q.coeffs if isinstance(q, QuboProblem) else np.asarray(q, dtype=float)
    upper = np.triu(Q, 1)
    diag = np.diag(Q)
    h = diag / 2.0 + (upper.sum(axis=1) + upper.sum(axis=0)) / 4.0
    ii, jj = np.nonzero(upper)
    J = {(int(i), int(j)): float(upper[i, j]) / 4.0 for i, j in zip(ii, jj)}
    offset = float(diag.sum() / 2.0 + upper.sum() / 4.0)
    return IsingProblem(h, J, offset)


def write_qubo(q: QuboProblem, path) -> None:
    """Coordinate-list text: a header line, then ``i j value`` for each nonzero entry."""
    lines = [f"# qubo num_vars={q.num_vars} offset={float(q.offset)!r}"]
    ii, jj = np.nonzero(q.coeffs)
    for i, j in zip(ii, jj):
        lines.append(f"{i} {j} {float(q.coeffs[i, j])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_qubo(path) -> tuple:
    """Inverse of ``write_qubo``: returns ``(coeffs, offset)``."""
    lines = Path(path).read_text().splitlines()
    head = dict(tok.split("=") for tok in lines[0].split()[2:])
    n = int(head["num_vars"])
    offset = float(head["offset"])
    Q = np.zeros((n, n))
    for line in lines[1:]:
        if not line.strip():
            continue
        i, j, v = line.split()
        Q[int(i), int(j)] = float(v)
    return Q, offset
