import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sonarblob.cluster import (
    Clustering,
    canonical_labels,
    cluster_k,
    kmeans,
    partition_cost,
    select_model_order,
    spectral_embed,
)
from sonarblob.errors import ParameterError
from sonarblob.graphbuild import AffinityGraph


def set_partitions(n):
    """All partitions of range(n) as restricted-growth label lists."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield list(prefix)
            return
        for k in range(top + 2):
            yield from rec(prefix + [k], max(top, k))
    yield from rec([0], 0)


def cost_oracle(L, labels, eps):
    K = max(labels) + 1
    total = 0.0
    for k in range(K):
        for i in range(len(labels)):
            for j in range(len(labels)):
                if labels[i] == k and labels[j] == k:
                    total += L[i, j]
    return total / K + eps * K


def random_graph(rng, n, density=0.7):
    W = rng.uniform(0.05, 1.0, (n, n)) * (rng.random((n, n)) < density)
    W = np.triu(W, 1)
    W = W + W.T
    np.fill_diagonal(W, 1.0)
    return AffinityGraph.from_weights(W)


def component_graph(rng, sizes):
    """Block-diagonal graph of connected, irregular components."""
    n = sum(sizes)
    W = np.zeros((n, n))
    truth = np.repeat(np.arange(len(sizes)), sizes)
    start = 0
    for s in sizes:
        block = rng.uniform(0.05, 1.0, (s, s)) * (rng.random((s, s)) < 0.6)
        block = np.triu(block, 1)
        # chain keeps every component connected
        idx = np.arange(s - 1)
        block[idx, idx + 1] = rng.uniform(0.2, 1.0, s - 1)
        block = block + block.T
        W[start : start + s, start : start + s] = block
        start += s
    perm = rng.permutation(n)
    W = W[np.ix_(perm, perm)]
    np.fill_diagonal(W, 1.0)
    return AffinityGraph.from_weights(W), truth[perm]


def two_cliques(n=4, w=0.8):
    W = np.zeros((2 * n, 2 * n))
    W[:n, :n] = w
    W[n:, n:] = w
    np.fill_diagonal(W, 1.0)
    return AffinityGraph.from_weights(W)


def same_partition(a, b):
    return np.array_equal(canonical_labels(a), canonical_labels(b))


# embedding

def test_embed_two_cliques_gives_two_points():
    Y = spectral_embed(two_cliques(), 2).Y
    assert len(np.unique(np.round(Y, 10), axis=0)) == 2


def test_embed_full_rank_rows_unit_norm(rng):
    g = random_graph(rng, 7, density=1.0)
    emb = spectral_embed(g, 7)
    np.testing.assert_allclose(np.linalg.norm(emb.Y, axis=1), 1.0)
    np.testing.assert_allclose(emb.X.T @ emb.X, np.eye(7), atol=1e-10)
    np.testing.assert_allclose(g.L @ emb.X, emb.X * emb.eigenvalues, atol=1e-10)


def test_embed_two_blob_toy_separation():
    W = np.full((6, 6), 0.01)
    W[:3, :3] = 0.9
    W[3:, 3:] = 0.9
    np.fill_diagonal(W, 1.0)
    Y = spectral_embed(AffinityGraph.from_weights(W), 2).Y
    within = max(np.linalg.norm(Y[i] - Y[j]) for i in range(6) for j in range(6) if (i < 3) == (j < 3))
    between = min(np.linalg.norm(Y[i] - Y[j]) for i in range(3) for j in range(3, 6))
    assert between > 10 * within


def test_embed_isolated_node_maps_to_e1():
    W = np.eye(3)
    W[0, 1] = W[1, 0] = 0.5
    emb = spectral_embed(AffinityGraph.from_weights(W), 2)
    np.testing.assert_allclose(np.linalg.norm(emb.Y, axis=1), 1.0)


def test_embed_sign_convention(rng):
    _, vecs = random_graph(rng, 9).spectrum
    for col in vecs.T:
        lead = col[np.abs(col) > 1e-12][0]
        assert lead > 0


def test_embed_rejects_bad_k(rng):
    with pytest.raises(ParameterError):
        spectral_embed(random_graph(rng, 4), 5)


# k-means

def test_kmeans_k1_and_kn(rng):
    Y = rng.normal(size=(9, 2))
    assert np.all(kmeans(Y, 1) == 0)
    assert len(np.unique(kmeans(Y, 9))) == 9


def test_kmeans_recovers_planar_blobs():
    rng = np.random.default_rng(7)
    a = rng.normal(0, 0.2, (25, 2))
    b = rng.normal(0, 0.2, (25, 2)) + [5, 5]
    Y = np.vstack([a, b])
    truth = np.repeat([0, 1], 25)
    for seed in range(10):
        assert same_partition(kmeans(Y, 2, seed=seed), truth)


def test_kmeans_deterministic(rng):
    Y = rng.normal(size=(40, 3))
    np.testing.assert_array_equal(kmeans(Y, 4, seed=3), kmeans(Y, 4, seed=3))


def test_canonical_labels_first_appearance():
    np.testing.assert_array_equal(canonical_labels(np.array([5, 5, 2, 9, 2])), [0, 0, 1, 2, 1])


# partition cost

def test_cost_two_cliques_exact_split():
    g = two_cliques()
    labels = np.repeat([0, 1], 4)
    for eps in (0.0, 0.5, 1.0):
        assert np.isclose(partition_cost(g, labels, eps), 2 * eps, atol=1e-12)


def test_cost_matches_double_loop(rng):
    for _ in range(30):
        n = int(rng.integers(2, 12))
        g = random_graph(rng, n)
        labels = canonical_labels(rng.integers(0, 3, n))
        eps = float(rng.uniform(0, 2))
        assert abs(partition_cost(g, labels, eps) - cost_oracle(g.L, list(labels), eps)) < 1e-10


def test_memberships_orthogonal(rng):
    c = Clustering(canonical_labels(rng.integers(0, 4, 30)))
    B = c.memberships.astype(int)
    G = B @ B.T
    assert np.all(G[~np.eye(c.K, dtype=bool)] == 0)
    assert B.sum() == 30


# model order

def test_three_components_small_eps():
    rng = np.random.default_rng(0)
    g, truth = component_graph(rng, [3, 3, 2])
    # S = sum of b_k^T L b_k over the true components; below S / (C (C - 1))
    # the exact split beats every merge
    S = 3 * partition_cost(g, truth, 0.0)
    eps = S / (2 * 3 * 2)
    best = select_model_order(g, 6, eps)
    assert best.K == 3
    assert same_partition(best.labels, truth)


def test_large_eps_gives_one_cluster(rng):
    assert select_model_order(random_graph(rng, 10), 5, eps=1e6).K == 1


def test_zero_eps_cost_nonincreasing_on_components():
    rng = np.random.default_rng(3)
    g, truth = component_graph(rng, [4, 4])
    costs = [partition_cost(g, cluster_k(g, K), 0.0) for K in (1, 2)]
    assert costs[1] <= costs[0] + 1e-12


def test_tie_goes_to_smaller_k():
    # two equal-weight cliques: exact split costs 2 eps, one cluster costs eps
    assert select_model_order(two_cliques(), 4, eps=0.3).K == 1


def test_model_order_rejects_bad_kmax(rng):
    g = random_graph(rng, 4)
    with pytest.raises(ParameterError):
        select_model_order(g, 5)
    with pytest.raises(ParameterError):
        select_model_order(g, 0)


def test_model_order_deterministic(rng):
    g = random_graph(rng, 25, density=0.3)
    a, b = select_model_order(g, 6, 0.1, seed=4), select_model_order(g, 6, 0.1, seed=4)
    assert np.array_equal(a.labels, b.labels) and a.cost == b.cost


@given(st.integers(0, 2**32 - 1), st.integers(3, 8), st.floats(0.05, 2.0))
def test_model_order_bounded_by_exhaustive_search(seed, n, eps):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, density=rng.uniform(0.3, 1.0))
    exhaustive = min(partition_cost(g, np.array(p), eps) for p in set_partitions(n) if max(p) < 3)
    one_cluster = partition_cost(g, np.zeros(n, dtype=int), eps)
    chosen = select_model_order(g, 3, eps)
    candidates = [partition_cost(g, cluster_k(g, K), eps) for K in (1, 2, 3)]
    assert chosen.cost == min(candidates)
    assert exhaustive - 1e-12 <= chosen.cost <= one_cluster + 1e-12


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4]))
def test_component_recovery_property(seed, C):
    rng = np.random.default_rng(seed)
    sizes = list(rng.integers(3, 8, C))
    g, truth = component_graph(rng, sizes)
    S = C * partition_cost(g, truth, 0.0)
    eps = S / (2 * C * (C - 1))
    chosen = select_model_order(g, min(sum(sizes), C + 3), eps)
    assert chosen.K == C
    assert same_partition(chosen.labels, truth)
