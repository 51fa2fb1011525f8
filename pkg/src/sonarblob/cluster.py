"""Spectral clustering of an affinity graph with model-order selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .graphbuild import AffinityGraph

DEFAULT_K_MAX = 10


@dataclass(frozen=True)
class EigenEmbedding:
    X: np.ndarray
    Y: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class Clustering:
    """A hard partition; ``labels`` are 0-based cluster ids numbered by first appearance."""

    labels: np.ndarray
    cost: float = float("nan")

    @property
    def K(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def memberships(self) -> np.ndarray:
        """``(K, N)`` boolean membership vectors ``b_k``."""
        return self.labels[None, :] == np.arange(self.K)[:, None]

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber labels 0, 1, ... in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=int)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inverse.ravel()]


def spectral_embed(graph: AffinityGraph, K: int) -> EigenEmbedding:
    """Eigenvectors of the ``K`` smallest Laplacian eigenvalues, rows normalized.

    Rows of ``X`` that are numerically zero are mapped to ``e_1`` in ``Y``.
    """
    n = graph.n
    if not 1 <= K <= n:
        raise ParameterError(f"K must be in [1, {n}], got {K}")
    vals, vecs = graph.spectrum
    X = vecs[:, :K]
    norms = np.linalg.norm(X, axis=1)
    Y = np.zeros_like(X)
    ok = norms > 1e-12
    Y[ok] = X[ok] / norms[ok, None]
    Y[~ok, 0] = 1.0
    return EigenEmbedding(X, Y, vals[:K])


def _kmeanspp(Y, K, rng):
    n = len(Y)
    centers = np.empty((K, Y.shape[1]))
    centers[0] = Y[rng.integers(n)]
    d2 = ((Y - centers[0]) ** 2).sum(axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[k] = Y[idx]
        d2 = np.minimum(d2, ((Y - centers[k]) ** 2).sum(axis=1))
    return centers


def _lloyd(Y, centers, max_iter, tol):
    prev = np.inf
    for _ in range(max_iter):
        d2 = ((Y[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        inertia = d2[np.arange(len(Y)), labels].sum()
        counts = np.bincount(labels, minlength=len(centers))
        for k in np.flatnonzero(counts == 0):
            # re-seed an empty cluster at the point farthest from its center
            far = int(d2[np.arange(len(Y)), labels].argmax())
            labels[far] = k
            d2[far] = 0.0
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, Y)
        counts = np.bincount(labels, minlength=len(centers))
        centers = sums / counts[:, None]
        if prev - inertia <= tol * max(prev, 1e-300) or inertia == 0:
            break
        prev = inertia
    d2 = ((Y[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(len(Y)), labels].sum()


def kmeans(
    Y: np.ndarray,
    K: int,
    seed: int = 0,
    n_init: int = 20,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> np.ndarray:
    """Lloyd's k-means from k-means++ starts; best inertia over ``n_init`` runs.

    Deterministic for a given ``seed``. Returns canonical 0-based labels.
    """
    Y = np.asarray(Y, dtype=float)
    n = len(Y)
    if not 1 <= K <= n:
        raise ParameterError(f"K must be in [1, {n}], got {K}")
    if K == 1:
        return np.zeros(n, dtype=int)
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(n_init):
        labels, inertia = _lloyd(Y, _kmeanspp(Y, K, rng), max_iter, tol)
        if inertia < best_inertia - 1e-12 * max(best_inertia, 1.0) or best is None:
            best, best_inertia = labels, inertia
    return canonical_labels(best)


def partition_cost(graph: AffinityGraph, clustering: Clustering | np.ndarray, eps: float) -> float:
    """Mean of ``b_k^T L b_k`` over clusters plus the ``eps * K`` penalty."""
    labels = clustering.labels if isinstance(clustering, Clustering) else canonical_labels(clustering)
    if len(labels) != graph.n:
        raise ParameterError("clustering size does not match graph")
    B = (labels[None, :] == np.unique(labels)[:, None]).astype(float)
    K = len(B)
    per_cluster = np.einsum("kn,nm,km->k", B, graph.L, B)
    return float(per_cluster.sum() / K + eps * K)


def cluster_k(graph: AffinityGraph, K: int, seed: int = 0) -> np.ndarray:
    return kmeans(spectral_embed(graph, K).Y, K, seed=seed)


def select_model_order(
    graph: AffinityGraph,
    K_max: int | None = None,
    eps: float = 1.0,
    seed: int = 0,
) -> Clustering:
    """Clustering with the smallest mean partition cost over ``K = 1..K_max``.

    Ties go to the smaller ``K``.
    """
    n = graph.n
    if K_max is None:
        K_max = min(n, DEFAULT_K_MAX)
    if not 1 <= K_max <= n:
        raise ParameterError(f"K_max must be in [1, {n}], got {K_max}")
    best = None
    for K in range(1, K_max + 1):
        labels = cluster_k(graph, K, seed)
        cost = partition_cost(graph, labels, eps)
        if best is None or cost < best.cost:
            best = Clustering(labels, cost)
    return best
