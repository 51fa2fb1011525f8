"""Cluster features and the two-threshold target/clutter rule."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .cluster import Clustering
from .errors import ParameterError
from .graphbuild import AffinityGraph

TARGET = "target"
CLUTTER = "clutter"

MIN_CALIBRATION_SAMPLES = 30


@dataclass
class ClusterReport:
    cluster_id: int
    connectivity: float
    median_entropy: float
    size: int
    label: str
    member_indices: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        out["median_entropy_bits"] = out.pop("median_entropy")
        return out


def connectivity(W: AffinityGraph | np.ndarray, b: np.ndarray) -> float:
    """``b^T W b`` for a membership vector; self-weights are included."""
    W = W.W if isinstance(W, AffinityGraph) else np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.shape != (W.shape[0],):
        raise ParameterError("membership vector length does not match W")
    return float(b @ W @ b)


def median_entropy(entropies) -> float:
    entropies = np.asarray(entropies, dtype=float)
    if entropies.size == 0:
        raise ParameterError("median entropy of an empty cluster")
    return float(np.median(entropies))


def decide(connectivity: float, median_entropy: float, eta_c: float, eta_h: float) -> str:
    """Target iff ``c > eta_c`` and ``H < eta_h`` (both strict)."""
    if not (np.isfinite(eta_c) and np.isfinite(eta_h)):
        raise ParameterError("thresholds must be finite")
    return TARGET if connectivity > eta_c and median_entropy < eta_h else CLUTTER


def decide_many(connectivity, median_entropy, eta_c, eta_h) -> np.ndarray:
    """Vectorized :func:`decide`; True marks a target."""
    return (np.asarray(connectivity) > eta_c) & (np.asarray(median_entropy) < eta_h)


def cluster_features(W: np.ndarray, labels: np.ndarray, entropies: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Connectivity and median entropy of every cluster, indexed by label."""
    W = np.asarray(W, dtype=float)
    labels = np.asarray(labels)
    K = int(labels.max()) + 1 if len(labels) else 0
    B = (labels[None, :] == np.arange(K)[:, None]).astype(float)
    conn = np.einsum("kn,nm,km->k", B, W, B)
    med = np.array([np.median(entropies[labels == k]) for k in range(K)])
    return conn, med


def classify_clusters(
    graph: AffinityGraph,
    clustering: Clustering,
    entropies: np.ndarray,
    eta_c: float,
    eta_h: float,
) -> list[ClusterReport]:
    entropies = np.asarray(entropies, dtype=float)
    conn, med = cluster_features(graph.W, clustering.labels, entropies)
    reports = []
    for k in range(clustering.K):
        members = clustering.members(k)
        reports.append(
            ClusterReport(
                cluster_id=k,
                connectivity=float(conn[k]),
                median_entropy=float(med[k]),
                size=len(members),
                label=decide(conn[k], med[k], eta_c, eta_h),
                member_indices=[int(i) for i in members],
            )
        )
    return reports


def calibrate_thresholds(
    clutter_connectivity,
    clutter_entropy,
    q: float = 0.05,
) -> tuple[float, float]:
    """Thresholds from clutter-only feature samples.

    ``eta_c`` is the ``1 - q`` quantile of clutter connectivity and ``eta_h``
    the ``q`` quantile of clutter median entropy, so each rule alone passes
    roughly a fraction ``q`` of clutter clusters.
    """
    c = np.asarray(clutter_connectivity, dtype=float)
    h = np.asarray(clutter_entropy, dtype=float)
    if min(c.size, h.size) < MIN_CALIBRATION_SAMPLES:
        raise ParameterError(f"need at least {MIN_CALIBRATION_SAMPLES} clutter samples")
    if not 0 < q < 1:
        raise ParameterError("quantile must lie in (0, 1)")
    return float(np.quantile(c, 1 - q)), float(np.quantile(h, q))
