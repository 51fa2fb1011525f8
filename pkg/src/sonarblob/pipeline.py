"""Block processing: pings -> point cloud -> graph -> clusters -> reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classify import ClusterReport, classify_clusters, cluster_features
from .cluster import DEFAULT_K_MAX, Clustering, select_model_order
from .graphbuild import AffinityGraph, AffinityParams, build_graph
from .signalproc import DEFAULT_BINS, ChirpSpec, PingRecord, PointCloud, build_point_cloud

ETA_MF = 5e-6


@dataclass(frozen=True)
class DetectorConfig:
    eta_mf: float = ETA_MF
    eta_c: float = 20.0
    eta_h: float = 4.5
    eps: float = 1.0
    k_max: int = DEFAULT_K_MAX
    n_bins: int = DEFAULT_BINS
    seed: int = 0


@dataclass
class BlockResult:
    cloud: PointCloud
    graph: AffinityGraph | None
    clustering: Clustering
    connectivity: np.ndarray = field(default_factory=lambda: np.zeros(0))
    median_entropy: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def reports(self, eta_c: float, eta_h: float) -> list[ClusterReport]:
        if self.graph is None:
            return _trivial_reports(self, eta_c, eta_h)
        return classify_clusters(self.graph, self.clustering, self.cloud.entropies, eta_c, eta_h)


def _trivial_reports(result: BlockResult, eta_c, eta_h):
    from .classify import decide

    if len(result.cloud) == 0:
        return []
    h = float(result.cloud.entropies[0])
    return [ClusterReport(0, 1.0, h, 1, decide(1.0, h, eta_c, eta_h), [0])]


def cluster_cloud(cloud: PointCloud, params: AffinityParams, config: DetectorConfig) -> BlockResult:
    """Graph, model-order selection and cluster features for a point cloud."""
    n = len(cloud)
    if n < 2:
        labels = np.zeros(n, dtype=int)
        conn = np.ones(n)
        return BlockResult(cloud, None, Clustering(labels, 0.0), conn, cloud.entropies.copy())
    graph = build_graph(cloud, params)
    clustering = select_model_order(graph, min(config.k_max, n), config.eps, config.seed)
    conn, med = cluster_features(graph.W, clustering.labels, cloud.entropies)
    return BlockResult(cloud, graph, clustering, conn, med)


def process_block(
    pings: Sequence[PingRecord],
    chirp: ChirpSpec,
    params: AffinityParams,
    config: DetectorConfig = DetectorConfig(),
) -> BlockResult:
    cloud = build_point_cloud(pings, chirp, config.eta_mf, config.n_bins)
    return cluster_cloud(cloud, params, config)
