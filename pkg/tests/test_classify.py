import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sonarblob.classify import (
    CLUTTER,
    TARGET,
    calibrate_thresholds,
    classify_clusters,
    cluster_features,
    connectivity,
    decide,
    decide_many,
    median_entropy,
)
from sonarblob.cluster import Clustering, canonical_labels
from sonarblob.errors import ParameterError
from sonarblob.graphbuild import AffinityGraph


def random_W(rng, n):
    W = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.5)
    W = np.triu(W, 1)
    W = W + W.T
    np.fill_diagonal(W, 1.0)
    return W


def test_singleton_connectivity_is_one(rng):
    W = random_W(rng, 5)
    b = np.zeros(5)
    b[2] = 1
    assert connectivity(W, b) == 1.0


def test_two_member_expansion():
    W = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert connectivity(W, np.ones(2)) == 3.0


def test_connectivity_double_loop_oracle(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 15))
        W = random_W(rng, n)
        b = (rng.random(n) < 0.5).astype(float)
        ref = 0.0
        for i in range(n):
            for j in range(n):
                if b[i] and b[j]:
                    ref += W[i, j]
        assert abs(connectivity(W, b) - ref) < 1e-10


def test_connectivity_accepts_graph(rng):
    W = random_W(rng, 6)
    b = np.array([1, 0, 1, 1, 0, 0.0])
    assert connectivity(AffinityGraph.from_weights(W), b) == connectivity(W, b)


def test_connectivity_length_checked():
    with pytest.raises(ParameterError):
        connectivity(np.eye(3), np.ones(2))


@given(st.integers(0, 2**32 - 1), st.integers(2, 25))
def test_connectivity_ordering_and_total(seed, n):
    rng = np.random.default_rng(seed)
    W = random_W(rng, n)
    labels = canonical_labels(rng.integers(0, 4, n))
    conn, _ = cluster_features(W, labels, np.zeros(n))
    assert conn.sum() <= W.sum() + 1e-12
    perm = rng.permutation(n)
    conn_p, _ = cluster_features(W[np.ix_(perm, perm)], labels[perm], np.zeros(n))
    np.testing.assert_allclose(np.sort(conn_p), np.sort(conn), atol=1e-12)


def test_median_examples():
    assert median_entropy([3.3] * 7) == 3.3
    assert median_entropy([1, 2, 4]) == 2
    assert median_entropy([1, 2, 4, 10]) == 3


def test_median_sort_oracle(rng):
    for _ in range(1000):
        h = rng.uniform(0, 7, int(rng.integers(1, 40)))
        s = sorted(h)
        k = len(s)
        ref = s[k // 2] if k % 2 else 0.5 * (s[k // 2 - 1] + s[k // 2])
        assert median_entropy(h) == ref


def test_median_empty_rejected():
    with pytest.raises(ParameterError):
        median_entropy([])


def test_decide_boundaries():
    assert decide(10.0, 4.0, 5.0, 4.5) == TARGET
    assert decide(5.0, 4.0, 5.0, 4.5) == CLUTTER
    assert decide(10.0, 4.5, 5.0, 4.5) == CLUTTER


def test_decide_needs_finite_thresholds():
    with pytest.raises(ParameterError):
        decide(1.0, 1.0, np.inf, 4.5)


@given(
    st.floats(0, 100), st.floats(0, 8), st.floats(0, 10), st.floats(0, 1),
    st.floats(0, 100), st.floats(0, 8),
)
def test_decide_monotone(c, h, dc, dh, eta_c, eta_h):
    if decide(c, h, eta_c, eta_h) == TARGET:
        assert decide(c + dc, max(h - dh, 0.0), eta_c, eta_h) == TARGET


def test_decide_many_matches_scalar(rng):
    c = rng.uniform(0, 10, 200)
    h = rng.uniform(3, 7, 200)
    got = decide_many(c, h, 5.0, 5.0)
    assert list(got) == [decide(a, b, 5.0, 5.0) == TARGET for a, b in zip(c, h)]


def test_classify_clusters_reports(rng):
    W = random_W(rng, 8)
    labels = np.array([0, 0, 1, 1, 1, 2, 2, 0])
    H = rng.uniform(3, 7, 8)
    reports = classify_clusters(AffinityGraph.from_weights(W), Clustering(labels), H, 2.0, 6.0)
    assert [r.size for r in reports] == [3, 3, 2]
    for r in reports:
        b = (labels == r.cluster_id).astype(float)
        assert np.isclose(r.connectivity, b @ W @ b)
        assert r.median_entropy == np.median(H[labels == r.cluster_id])
        assert r.label == decide(r.connectivity, r.median_entropy, 2.0, 6.0)
    assert set(reports[0].to_json()) >= {"cluster_id", "connectivity", "median_entropy_bits", "size", "label"}


def test_calibrate_constant_features():
    assert calibrate_thresholds([3.0] * 50, [5.0] * 50) == (3.0, 5.0)


def test_calibrate_uniform_quantile():
    rng = np.random.default_rng(1)
    eta_c, _ = calibrate_thresholds(rng.uniform(0, 1, 20_000), rng.uniform(0, 1, 20_000))
    assert abs(eta_c - 0.95) < 0.01


def test_calibrate_median_case(rng):
    c, h = rng.normal(size=101), rng.normal(size=101)
    assert calibrate_thresholds(c, h, q=0.5) == (np.median(c), np.median(h))


def test_calibrate_needs_samples():
    with pytest.raises(ParameterError):
        calibrate_thresholds([1.0] * 29, [1.0] * 29)
    with pytest.raises(ParameterError):
        calibrate_thresholds([1.0] * 40, [1.0] * 40, q=1.0)
