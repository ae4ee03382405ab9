"""Spatially constrained Ward clustering of voxels and the maps between
voxel and cluster resolution."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist

from . import _backend
from .core import GridGeometry

EXACT_DIAMETER_MAX = 2000


@dataclass(frozen=True, eq=False)
class Clustering:
    assignment: np.ndarray
    q: int
    diameters: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.intp)
        if a.ndim != 1 or (len(a) and (a.min() < 0 or a.max() >= self.q)):
            raise ValueError("assignment labels must lie in [0, q)")
        if len(np.unique(a)) != self.q:
            raise ValueError("every cluster label must be used")
        object.__setattr__(self, "assignment", a)

    def members(self, j) -> np.ndarray:
        return np.flatnonzero(self.assignment == j)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.q)


def adjacency_edges(geometry: GridGeometry) -> np.ndarray:
    """Face-neighbour (6-connectivity) pairs ``(i, j)``, ``i < j``, as an (E, 2) array."""
    vol = geometry.index_volume()
    pairs = []
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a, b = vol[tuple(lo)].ravel(), vol[tuple(hi)].ravel()
        keep = (a >= 0) & (b >= 0)
        pairs.append(np.stack([a[keep], b[keep]], axis=1))
    edges = np.concatenate(pairs)
    edges.sort(axis=1)
    # row-major order so both backends seed the heap identically
    return np.ascontiguousarray(edges[np.lexsort((edges[:, 1], edges[:, 0]))], dtype=np.intp)


def _graph(edges, p):
    data = np.ones(len(edges), dtype=np.int8)
    return sp.coo_matrix((data, (edges[:, 0], edges[:, 1])), shape=(p, p)).tocsr()


def n_components(geometry: GridGeometry) -> int:
    edges = adjacency_edges(geometry)
    return connected_components(_graph(edges, geometry.n_features), directed=False)[0]


def subsample_rows(n, fraction, seed) -> np.ndarray:
    """Sorted uniform subset of ``floor(fraction * n)`` rows, without replacement."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    size = math.floor(fraction * n)
    if size < 2:
        raise ValueError(f"subsample of {n} rows at fraction {fraction} has fewer than 2 rows")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=size, replace=False))


def cluster_diameters(assignment, q, geometry: GridGeometry) -> np.ndarray:
    """Largest pairwise voxel distance per cluster.

    Exact up to ``EXACT_DIAMETER_MAX`` voxels, bounding-box diagonal above.
    """
    coords = geometry.feature_coords
    order = np.argsort(assignment, kind="stable")
    bounds = np.searchsorted(assignment[order], np.arange(q + 1))
    out = np.zeros(q)
    for j in range(q):
        pts = coords[order[bounds[j]:bounds[j + 1]]]
        if len(pts) < 2:
            continue
        if len(pts) <= EXACT_DIAMETER_MAX:
            out[j] = pdist(pts).max()
        else:
            out[j] = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return out


def ward_cluster(X_sub, geometry: GridGeometry, q: int) -> Clustering:
    """Agglomerate voxels by the Ward criterion along the 6-neighbour graph.

    Each voxel is described by its column of ``X_sub``. At every step the
    adjacent pair with the smallest Ward increase merges, ties broken by the
    smallest pair of cluster ids (voxels keep their index, merged clusters
    take ids p, p+1, ... in merge order). Labels are renumbered by first
    appearance in feature order.
    """
    X_sub = np.asarray(X_sub, dtype=np.float64)
    p = geometry.n_features
    if X_sub.ndim != 2 or X_sub.shape[1] != p:
        raise ValueError(f"X_sub must have {p} columns")
    if not 1 <= q <= p:
        raise ValueError(f"n_clusters={q} must lie in [1, {p}]")
    edges = adjacency_edges(geometry)
    n_comp = connected_components(_graph(edges, p), directed=False)[0]
    if q < n_comp:
        raise ValueError(f"n_clusters={q} is below the {n_comp} connected components of the mask")

    roots, _ = _backend.ward_agglomerate(np.ascontiguousarray(X_sub.T), edges, q)
    _, first, labels = np.unique(roots, return_index=True, return_inverse=True)
    # renumber so labels follow first occurrence in feature order
    rank = np.empty(len(first), dtype=np.intp)
    rank[np.argsort(first)] = np.arange(len(first))
    assignment = rank[labels.ravel()]
    return Clustering(assignment, q, cluster_diameters(assignment, q, geometry))


def _averaging_matrix(clustering: Clustering):
    a = clustering.assignment
    w = 1.0 / clustering.sizes()[a]
    return sp.csr_matrix((w, (np.arange(len(a)), a)), shape=(len(a), clustering.q))


def reduce_features(X, clustering: Clustering) -> np.ndarray:
    """Column ``j`` of the result is the mean of the ``X`` columns in cluster ``j``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(clustering.assignment):
        raise ValueError("X columns do not match the clustering")
    return np.asarray((_averaging_matrix(clustering).T @ X.T).T)


def broadcast_qvalues(cluster_q, clustering: Clustering) -> np.ndarray:
    cluster_q = np.asarray(cluster_q, dtype=np.float64)
    if cluster_q.shape != (clustering.q,):
        raise ValueError(f"expected {clustering.q} cluster values, got {cluster_q.shape}")
    return cluster_q[clustering.assignment]


def max_diameter(clusterings) -> float:
    """Largest cluster diameter over all clusterings: the spatial tolerance delta."""
    clusterings = list(clusterings)
    if not clusterings:
        raise ValueError("need at least one clustering")
    return float(max(c.diameters.max(initial=0.0) for c in clusterings))
