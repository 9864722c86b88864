"""Label-based partitions of the city set and the three clustering quality indices."""
from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

from .instances import Instance

MIN_CLUSTER_SIZE = 3
DEFAULT_MAX_CLUSTER_SIZE = 10
SIMILARITY_EPS = 1e-9


class InvalidLabelingError(ValueError):
    pass


class UndefinedMetricError(ValueError):
    pass


class Metric(str, enum.Enum):
    MODULARITY = "modularity"
    DAVIES_BOULDIN = "davies_bouldin"
    CALINSKI_HARABASZ = "calinski_harabasz"

    @property
    def maximize(self) -> bool:
        return self is not Metric.DAVIES_BOULDIN


def check_labeling(labels: Sequence[int], max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE,
                   min_cluster_size: int = MIN_CLUSTER_SIZE) -> int:
    """Validate a 1-based label vector and return the number of clusters."""
    lab = np.asarray(labels)
    if lab.ndim != 1 or len(lab) == 0:
        raise InvalidLabelingError("labels must be a non-empty vector")
    if not np.issubdtype(lab.dtype, np.integer):
        raise InvalidLabelingError("labels must be integers")
    n_clusters = int(lab.max())
    if lab.min() < 1:
        raise InvalidLabelingError("labels must be in 1..C")
    sizes = np.bincount(lab, minlength=n_clusters + 1)[1:]
    empty = np.flatnonzero(sizes == 0)
    if len(empty):
        raise InvalidLabelingError(f"empty cluster label(s) {(empty + 1).tolist()}")
    small = np.flatnonzero(sizes < min_cluster_size)
    if len(small):
        c = int(small[0]) + 1
        raise InvalidLabelingError(
            f"cluster {c} has size {sizes[small[0]]} < {min_cluster_size}")
    big = np.flatnonzero(sizes > max_cluster_size)
    if len(big):
        c = int(big[0]) + 1
        raise InvalidLabelingError(
            f"cluster {c} has size {sizes[big[0]]} > {max_cluster_size}")
    return n_clusters


def is_valid(labels, max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE) -> bool:
    try:
        check_labeling(labels, max_cluster_size)
    except InvalidLabelingError:
        return False
    return True


def extract_clusters(labels: Sequence[int], max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE) -> list:
    """Cluster ``i`` (0-based list position) holds the cities labelled ``i + 1``.

    Cities are 0-based indices; each cluster is a sorted tuple.
    """
    n_clusters = check_labeling(labels, max_cluster_size)
    lab = np.asarray(labels)
    return [tuple(np.flatnonzero(lab == c).tolist()) for c in range(1, n_clusters + 1)]


def labels_from_clusters(clusters: Sequence[Sequence[int]], n: int) -> np.ndarray:
    lab = np.zeros(n, dtype=np.int64)
    for c, members in enumerate(clusters, start=1):
        lab[list(members)] = c
    if (lab == 0).any():
        raise InvalidLabelingError("clusters do not cover every city")
    return lab


def canonical_labels(labels) -> np.ndarray:
    """Relabel so labels appear in first-occurrence order (1, 2, ...)."""
    lab = np.asarray(labels)
    mapping = {}
    out = np.empty(len(lab), dtype=np.int64)
    for i, v in enumerate(lab.tolist()):
        if v not in mapping:
            mapping[v] = len(mapping) + 1
        out[i] = mapping[v]
    return out


def similarity_matrix(inst: Instance) -> np.ndarray:
    w = 1.0 / (SIMILARITY_EPS + inst.dist)
    np.fill_diagonal(w, 0.0)
    return w


def _onehot(labels) -> np.ndarray:
    lab = np.asarray(labels) - 1
    h = np.zeros((len(lab), int(lab.max()) + 1))
    h[np.arange(len(lab)), lab] = 1.0
    return h


def modularity_from_weights(weights: np.ndarray, labels) -> float:
    h = _onehot(labels)
    total = weights.sum()
    e = h.T @ weights @ h / total
    a = e.sum(axis=1)
    return float(np.trace(e) - (a ** 2).sum())


def modularity(inst: Instance, clusters) -> float:
    """Newman-Girvan modularity on the inverse-distance similarity graph."""
    return modularity_from_weights(similarity_matrix(inst), labels_from_clusters(clusters, inst.n_cities))


def _centroids(points: np.ndarray, labels):
    h = _onehot(labels)
    counts = h.sum(axis=0)
    return (h.T @ points) / counts[:, None], h


def davies_bouldin_points(points: np.ndarray, labels) -> float:
    lab = np.asarray(labels)
    if lab.max() < 2:
        raise UndefinedMetricError("Davies-Bouldin needs at least 2 clusters")
    mu, h = _centroids(points, lab)
    spread = np.linalg.norm(points - mu[lab - 1], axis=1)
    s = (h.T @ spread) / h.sum(axis=0)
    centre_d = np.linalg.norm(mu[:, None, :] - mu[None, :, :], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (s[:, None] + s[None, :]) / centre_d
    np.fill_diagonal(ratio, -np.inf)
    ratio[np.isnan(ratio)] = np.inf
    return float(ratio.max(axis=1).mean())


def calinski_harabasz_points(points: np.ndarray, labels) -> float:
    lab = np.asarray(labels)
    n = len(lab)
    k = int(lab.max())
    if k < 2 or n <= k:
        raise UndefinedMetricError("Calinski-Harabasz needs 2 <= C < N")
    mu, h = _centroids(points, lab)
    counts = h.sum(axis=0)
    centre = points.mean(axis=0)
    between = float((counts * ((mu - centre) ** 2).sum(axis=1)).sum())
    within = float(((points - mu[lab - 1]) ** 2).sum())
    if within == 0.0:
        return float("inf")
    return between / within * (n - k) / (k - 1)


def davies_bouldin(inst: Instance, clusters) -> float:
    return davies_bouldin_points(inst.coords, labels_from_clusters(clusters, inst.n_cities))


def calinski_harabasz(inst: Instance, clusters) -> float:
    return calinski_harabasz_points(inst.coords, labels_from_clusters(clusters, inst.n_cities))


class MetricEvaluator:
    """Scores label vectors for one metric, caching the per-instance inputs.

    ``score`` returns a value where larger is always better (Davies-Bouldin is
    negated) and undefined metrics score ``-inf``.
    """

    def __init__(self, inst: Instance, metric: Metric):
        self.inst = inst
        self.metric = Metric(metric)
        self._weights = similarity_matrix(inst) if self.metric is Metric.MODULARITY else None
        self._memo = {}

    def raw(self, labels) -> float:
        if self.metric is Metric.MODULARITY:
            return modularity_from_weights(self._weights, labels)
        if self.metric is Metric.DAVIES_BOULDIN:
            return davies_bouldin_points(self.inst.coords, labels)
        return calinski_harabasz_points(self.inst.coords, labels)

    def score(self, labels) -> float:
        key = np.asarray(labels, dtype=np.int64).tobytes()
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        try:
            v = self.raw(labels)
            v = v if self.metric.maximize else -v
        except UndefinedMetricError:
            v = float("-inf")
        if len(self._memo) > 200_000:
            self._memo.clear()
        self._memo[key] = v
        return v
