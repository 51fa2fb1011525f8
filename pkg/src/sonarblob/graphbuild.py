"""Affinity graph over a point cloud: distances, gated weights, Laplacian.

Conventions at the step-function boundaries:

* the body-size gate adds the range penalty only when ``dr > l``;
* the velocity gate keeps an edge when ``2 dr <= v_max dt``, so a pair moving
  exactly at ``v_max`` stays linked and same-ping pairs (``dt = 0``) are linked
  only when they coincide in range.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import NumericalError, ParameterError
from .infodist import DEFAULT_VALUE_BINS, pairwise_nid
from .signalproc import EchoPoint, PointCloud

# e^-14 < 1e-6: skipping the spectral term beyond this cannot move a weight by more
DEFAULT_SKIP = 14.0


@dataclass(frozen=True)
class AffinityParams:
    alpha: float = 0.1
    beta: float = 1.0
    tau: float = 1.0
    body_size: float = 0.6
    v_max: float = 2.0
    t_pri: float = 0.7
    value_bins: int = DEFAULT_VALUE_BINS
    skip_threshold: float | None = DEFAULT_SKIP

    def __post_init__(self):
        for name in ("alpha", "beta", "tau", "body_size"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")
        if self.v_max <= 0:
            raise ParameterError("v_max must be positive")
        if self.t_pri <= 0:
            raise ParameterError("t_pri must be positive")


def _geometric_term(dr, dt, params: AffinityParams):
    dr = np.asarray(dr, dtype=float)
    return params.beta * dr * (dr > params.body_size) + params.tau * np.asarray(dt, dtype=float)


def pair_distance(i: EchoPoint, j: EchoPoint, nid_ij: float, params: AffinityParams) -> float:
    """``alpha NID + beta dr u(dr - l) + tau dt`` for one pair of points."""
    if not 0.0 <= nid_ij <= 1.0:
        raise ParameterError(f"NID must lie in [0, 1], got {nid_ij}")
    dr = abs(i.range_m - j.range_m)
    dt = abs(i.ping - j.ping) * params.t_pri
    return float(params.alpha * nid_ij + _geometric_term(dr, dt, params))


def velocity_feasible(dr, dt, v_max: float):
    """True where the apparent speed ``2 dr / dt`` does not exceed ``v_max``."""
    return 2.0 * np.asarray(dr, dtype=float) <= v_max * np.asarray(dt, dtype=float)


def edge_weight(delta: float, dr: float, dt: float, v_max: float) -> float:
    if delta < 0:
        raise ParameterError("distance must be non-negative")
    return float(np.exp(-delta)) if velocity_feasible(dr, dt, v_max) else 0.0


@dataclass(frozen=True)
class AffinityGraph:
    """Weights ``W`` (unit diagonal), adjacency ``A``, degrees and Laplacian ``L``.

    ``L = D^-1/2 (D - A) D^-1/2`` with the pseudo-inverse convention for
    isolated nodes, whose rows and columns of ``L`` are zero.
    """

    W: np.ndarray
    A: np.ndarray
    degree: np.ndarray
    L: np.ndarray

    @property
    def n(self) -> int:
        return len(self.degree)

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.degree)

    @property
    def isolated(self) -> np.ndarray:
        return self.degree <= 0

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and sign-normalized eigenvectors of ``L``."""
        try:
            vals, vecs = np.linalg.eigh(self.L)
        except np.linalg.LinAlgError as exc:
            cond = np.linalg.cond(self.L) if np.all(np.isfinite(self.L)) else np.inf
            raise NumericalError(f"eigendecomposition failed (cond={cond:.3g}): {exc}") from exc
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
        # first entry with non-negligible magnitude is made positive
        tol = 1e-12 * max(1.0, np.abs(vecs).max())
        lead = np.argmax(np.abs(vecs) > tol, axis=0)
        signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
        signs[signs == 0] = 1.0
        return vals, vecs * signs

    @classmethod
    def from_weights(cls, W: np.ndarray) -> "AffinityGraph":
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ParameterError("weight matrix must be square")
        if not np.allclose(W, W.T, rtol=0, atol=1e-12):
            raise ParameterError("weight matrix must be symmetric")
        if np.any(W < 0):
            raise ParameterError("weights must be non-negative")
        W = 0.5 * (W + W.T)
        A = W.copy()
        np.fill_diagonal(A, 0.0)
        degree = A.sum(axis=1)
        return cls(W, A, degree, normalized_laplacian(A, degree))


def normalized_laplacian(A: np.ndarray, degree: np.ndarray | None = None) -> np.ndarray:
    if degree is None:
        degree = A.sum(axis=1)
    inv_sqrt = np.zeros_like(degree, dtype=float)
    nz = degree > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(degree[nz])
    L = -(inv_sqrt[:, None] * A * inv_sqrt[None, :])
    L[np.diag_indices_from(L)] += nz.astype(float)
    return 0.5 * (L + L.T)


def weight_matrix(cloud: PointCloud, params: AffinityParams) -> np.ndarray:
    """Symmetric gated weight matrix with unit diagonal."""
    n = len(cloud)
    iu, ju = np.triu_indices(n, k=1)
    dr = np.abs(cloud.ranges[iu] - cloud.ranges[ju])
    dt = np.abs(cloud.pings[iu] - cloud.pings[ju]) * params.t_pri
    geo = _geometric_term(dr, dt, params)
    feasible = velocity_feasible(dr, dt, params.v_max)

    nid_term = np.ones_like(geo)
    need = feasible & (params.alpha > 0)
    if params.skip_threshold is not None:
        need &= geo <= params.skip_threshold
    if np.any(need):
        if cloud.spectra.shape[1] == 0:
            raise ParameterError("alpha > 0 requires point spectra")
        pairs = np.column_stack([iu[need], ju[need]])
        nid_term[need] = pairwise_nid(cloud.spectra, pairs, params.value_bins)

    w = np.where(feasible, np.exp(-(params.alpha * nid_term + geo)), 0.0)
    W = np.zeros((n, n))
    W[iu, ju] = w
    W[ju, iu] = w
    np.fill_diagonal(W, 1.0)
    return W


def build_graph(points: PointCloud | Sequence[EchoPoint], params: AffinityParams) -> AffinityGraph:
    cloud = points if isinstance(points, PointCloud) else PointCloud.from_points(list(points))
    if len(cloud) < 2:
        raise ParameterError("need at least two points to build a graph")
    return AffinityGraph.from_weights(weight_matrix(cloud, params))
