import itertools

import numpy as np
import pytest

from conftest import is_connected
from ecko.cluster import (
    Clustering,
    adjacency_edges,
    broadcast_qvalues,
    cluster_diameters,
    max_diameter,
    n_components,
    reduce_features,
    subsample_rows,
    ward_cluster,
)
from ecko.core import GridGeometry


def within_ss(X, labels):
    return sum(((X[:, labels == k] - X[:, labels == k].mean(axis=1, keepdims=True)) ** 2).sum()
               for k in np.unique(labels))


def brute_force_two_partition(X, geometry):
    """Connected 2-partition with the smallest within-cluster sum of squares."""
    p = geometry.n_features
    best, best_labels = np.inf, None
    for bits in itertools.product([0, 1], repeat=p - 1):
        labels = np.array((0,) + bits)
        if labels.min() == labels.max():
            continue
        if not all(is_connected(np.flatnonzero(labels == k), geometry) for k in (0, 1)):
            continue
        ss = within_ss(X, labels)
        if ss < best - 1e-12:
            best, best_labels = ss, labels
    return best_labels


def test_subsample_examples():
    assert len(subsample_rows(10, 0.7, 0)) == 7
    assert subsample_rows(10, 1.0, 0).tolist() == list(range(10))
    assert np.array_equal(subsample_rows(50, 0.7, 9), subsample_rows(50, 0.7, 9))
    with pytest.raises(ValueError):
        subsample_rows(2, 0.7, 0)
    with pytest.raises(ValueError):
        subsample_rows(10, 0.0, 0)


def test_line_example(line4):
    X = np.tile([1.0, 1.0, 5.0, 5.0], (6, 1))
    cl = ward_cluster(X, line4, 2)
    assert cl.assignment.tolist() == [0, 0, 1, 1]
    assert cl.diameters.tolist() == [1.0, 1.0]


def test_ward_two_partition_matches_brute_force():
    agree = 0
    geometries = [GridGeometry.full((6, 1, 1)), GridGeometry.full((3, 2, 1)), GridGeometry.full((2, 2, 2))]
    for seed in range(30):
        r = np.random.default_rng(seed)
        g = geometries[seed % 3]
        # two well separated connected blobs, so greedy Ward has to find the optimum
        truth = brute_force_two_partition(r.standard_normal((4, g.n_features)), g)
        centers = np.where(truth == 0, 0.0, 10.0)
        X = centers + 0.3 * r.standard_normal((4, g.n_features))
        oracle = brute_force_two_partition(X, g)
        cl = ward_cluster(X, g, 2)
        same = np.array_equal(cl.assignment, oracle) or np.array_equal(cl.assignment, 1 - oracle)
        agree += same
    assert agree == 30


def test_singletons(rng):
    g = GridGeometry.full((3, 3, 2))
    cl = ward_cluster(rng.standard_normal((5, 18)), g, 18)
    assert cl.assignment.tolist() == list(range(18))
    assert not cl.diameters.any()


def test_clusters_are_connected_and_deterministic(rng):
    g = GridGeometry.full((8, 7, 6))
    X = rng.standard_normal((20, g.n_features))
    cl = ward_cluster(X, g, 25)
    assert cl.q == 25 and len(np.unique(cl.assignment)) == 25
    for j in range(25):
        assert is_connected(cl.members(j), g)
    assert np.array_equal(cl.assignment, ward_cluster(X, g, 25).assignment)
    # labels renumbered by first appearance
    _, first = np.unique(cl.assignment, return_index=True)
    assert np.all(np.diff(first) > 0)


def test_masked_components(rng):
    mask = np.zeros((5, 1, 1), dtype=bool)
    mask[[0, 1, 3, 4]] = True
    g = GridGeometry(mask.shape, mask)
    assert n_components(g) == 2
    with pytest.raises(ValueError):
        ward_cluster(rng.standard_normal((3, 4)), g, 1)
    cl = ward_cluster(rng.standard_normal((3, 4)), g, 2)
    assert cl.assignment.tolist() == [0, 0, 1, 1]


def test_ward_rejects_bad_q(rng, line4):
    with pytest.raises(ValueError):
        ward_cluster(rng.standard_normal((3, 4)), line4, 5)
    with pytest.raises(ValueError):
        ward_cluster(rng.standard_normal((3, 5)), line4, 2)


def test_adjacency_edge_count():
    g = GridGeometry.full((4, 3, 2))
    assert len(adjacency_edges(g)) == 3 * 3 * 2 + 4 * 2 * 2 + 4 * 3 * 1


def test_reduce_examples(rng):
    X = rng.standard_normal((5, 4))
    single = Clustering(np.arange(4), 4, np.zeros(4))
    np.testing.assert_allclose(reduce_features(X, single), X)
    dup = X.copy()
    dup[:, 1] = dup[:, 0]
    merged = Clustering(np.array([0, 0, 1, 2]), 3, np.zeros(3))
    np.testing.assert_allclose(reduce_features(dup, merged)[:, 0], dup[:, 0])
    pair = Clustering(np.array([0, 0]), 1, np.zeros(1))
    np.testing.assert_allclose(reduce_features(np.array([[1.0, 3.0], [2.0, 4.0]]), pair)[:, 0], [2.0, 3.0])
    with pytest.raises(ValueError):
        reduce_features(X[:, :3], single)


def test_broadcast_examples():
    cl = Clustering(np.array([0, 0, 1]), 2, np.zeros(2))
    assert broadcast_qvalues([0.1, 0.9], cl).tolist() == [0.1, 0.1, 0.9]
    assert broadcast_qvalues([0.3, 0.3], cl).tolist() == [0.3] * 3
    with pytest.raises(ValueError):
        broadcast_qvalues([0.1], cl)
    with pytest.raises(ValueError):
        Clustering(np.array([0, 2]), 2, np.zeros(2))


def test_diameters():
    mask = np.zeros((4, 5, 1), dtype=bool)
    mask[0, 0, 0] = mask[3, 4, 0] = True
    g = GridGeometry(mask.shape, mask)
    assert cluster_diameters(np.array([0, 0]), 1, g).tolist() == [5.0]
    a = Clustering(np.array([0, 1]), 2, np.array([2.0, 7.0]))
    b = Clustering(np.array([0, 0]), 1, np.array([4.0]))
    assert max_diameter([a, b]) == 7.0
    assert max_diameter([Clustering(np.arange(3), 3, np.zeros(3))]) == 0.0
    with pytest.raises(ValueError):
        max_diameter([])
