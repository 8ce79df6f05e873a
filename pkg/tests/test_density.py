import numpy as np
import pytest

from litkit.density import (
    TooFewPoints,
    cluster_density,
    core_distances,
    minimum_spanning_tree,
    mutual_reachability,
    pairwise_distances,
)

from conftest import gaussian_blobs


def _best_match_agreement(found, truth):
    """Greedy best label matching; fraction of points agreeing."""
    pairs = {}
    for f, t in zip(found, truth):
        if f >= 0:
            pairs[(f, t)] = pairs.get((f, t), 0) + 1
    used_f, used_t, matched = set(), set(), 0
    for (f, t), count in sorted(pairs.items(), key=lambda kv: -kv[1]):
        if f not in used_f and t not in used_t:
            used_f.add(f)
            used_t.add(t)
            matched += count
    return matched / len(truth)


def test_two_blobs_recovered(rng):
    x, truth = gaussian_blobs(rng, [50, 50], sigma=0.1, separation=10.0)
    labels = cluster_density(x, min_cluster=10, min_samples=10)
    assert len(set(labels[labels >= 0])) == 2
    assert (labels >= 0).sum() >= 95
    assert _best_match_agreement(labels, truth) >= 0.95


def test_sparse_points_no_small_clusters(rng):
    x = rng.uniform(0, 1000.0, size=(20, 4))
    labels = cluster_density(x, min_cluster=10)
    found = set(labels[labels >= 0].tolist())
    assert len(found) <= 1
    for c in found:
        assert (labels == c).sum() >= 10


def test_duplicate_group_forms_cluster(rng):
    dup = np.tile(rng.normal(size=(1, 3)), (10, 1))
    spread = rng.uniform(10, 500, size=(30, 3))
    x = np.vstack([dup, spread])
    labels = cluster_density(x, min_cluster=10, min_samples=5)
    assert len(set(labels[:10].tolist())) == 1
    assert labels[0] >= 0


def test_min_cluster_floor_always_respected(rng):
    for trial in range(10):
        x = rng.normal(size=(40, 3)) * rng.uniform(0.5, 3.0)
        labels = cluster_density(x, min_cluster=12, min_samples=4)
        for c in set(labels[labels >= 0].tolist()):
            assert (labels == c).sum() >= 12


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        cluster_density(np.zeros((5, 2)), min_cluster=10)


def test_deterministic(rng):
    x, _ = gaussian_blobs(rng, [40, 40, 40], dim=4)
    a = cluster_density(x, 15, 15)
    b = cluster_density(x.copy(), 15, 15)
    assert np.array_equal(a, b)


def test_core_distance_definition():
    x = np.array([[0.0], [1.0], [3.0]])
    dist = pairwise_distances(x)
    # self counts as the first neighbor
    assert np.allclose(core_distances(dist, 1), [0, 0, 0])
    assert np.allclose(core_distances(dist, 2), [1, 1, 2])
    assert np.allclose(core_distances(dist, 3), [3, 2, 3])


def test_mutual_reachability_is_max():
    dist = np.array([[0.0, 2.0], [2.0, 0.0]])
    core = np.array([3.0, 1.0])
    mr = mutual_reachability(dist, core)
    assert mr[0, 1] == 3.0 and mr[1, 0] == 3.0 and mr[0, 0] == 0.0


def test_mst_total_weight_matches_bruteforce(rng):
    # compare against exhaustive Kruskal over all edges
    x = rng.normal(size=(12, 3))
    w = pairwise_distances(x)
    edges = minimum_spanning_tree(w)
    total = sum(e[0] for e in edges)

    all_edges = sorted(
        (w[i, j], i, j) for i in range(12) for j in range(i + 1, 12)
    )
    parent = list(range(12))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    kruskal = 0.0
    for weight, i, j in all_edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            kruskal += weight
    assert abs(total - kruskal) < 1e-9
