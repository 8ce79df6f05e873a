"""Hierarchical density clustering with noise labels.

The procedure: core distance of each point is the distance to its
min_samples-th nearest neighbor (the point itself counts as the first);
pairwise mutual-reachability distance max(core_a, core_b, d(a, b)); a minimum
spanning tree over those distances; a single-linkage merge tree; a condensed
tree where components smaller than min_cluster fall out of their parent
instead of forming clusters; and excess-of-mass selection, which keeps a
cluster when its own stability beats the summed stability of its selected
descendants. Points never captured by a selected cluster are labeled -1.

All steps are deterministic: ties resolve by index order, and densities use
lambda = 1 / max(distance, 1e-10) so exact duplicates stay finite.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MIN_DIST = 1e-10


class TooFewPoints(Exception):
    """Fewer rows than min_cluster; no cluster can form."""


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def core_distances(dist: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the min_samples-th nearest neighbor, self included."""
    n = dist.shape[0]
    k = min(max(min_samples, 1), n)
    return np.sort(dist, axis=1)[:, k - 1]


def mutual_reachability(dist: np.ndarray, core: np.ndarray) -> np.ndarray:
    mr = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0.0)
    return mr


def minimum_spanning_tree(weights: np.ndarray) -> list[tuple[float, int, int]]:
    """Prim's algorithm over a dense symmetric weight matrix.

    Returns n-1 edges (weight, u, v). Ties resolve toward lower vertex index
    via argmin, so the tree is deterministic.
    """
    n = weights.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best_from = np.zeros(n, dtype=np.int64)
    in_tree[0] = True
    best_edge = weights[0].copy()
    best_edge[0] = np.inf
    best_from[:] = 0
    edges = []
    for _ in range(n - 1):
        v = int(np.argmin(np.where(in_tree, np.inf, best_edge)))
        edges.append((float(best_edge[v]), int(best_from[v]), v))
        in_tree[v] = True
        closer = weights[v] < best_edge
        closer &= ~in_tree
        best_edge[closer] = weights[v][closer]
        best_from[closer] = v
    return edges


@dataclass
class _CondensedCluster:
    parent: int | None
    birth_lambda: float
    children: list[int] = field(default_factory=list)
    # points that exit this cluster directly, with the lambda at which they go
    point_ids: list[int] = field(default_factory=list)
    point_lambdas: list[float] = field(default_factory=list)
    split_lambda: float | None = None  # lambda at which this cluster splits
    size: int = 0


def _single_linkage(edges: list[tuple[float, int, int]], n: int):
    """Union-find dendrogram: internal node i+n merges at sorted edge i."""
    edges = sorted(edges, key=lambda e: (e[0], e[1], e[2]))
    parent = list(range(2 * n - 1))
    node_of_root = list(range(n)) + [0] * (n - 1)
    children = np.zeros((n - 1, 2), dtype=np.int64)
    heights = np.zeros(n - 1)
    sizes = np.ones(2 * n - 1, dtype=np.int64)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, (w, u, v) in enumerate(edges):
        ru, rv = find(u), find(v)
        new = n + i
        children[i] = (node_of_root[ru], node_of_root[rv])
        heights[i] = w
        sizes[new] = sizes[node_of_root[ru]] + sizes[node_of_root[rv]]
        parent[ru] = new
        parent[rv] = new
        parent[new] = new
        node_of_root[new] = new
    return children, heights, sizes


def _condense(children, heights, sizes, n, min_cluster):
    """Walk the dendrogram top-down, dropping sub-min_cluster components."""
    clusters: list[_CondensedCluster] = [_CondensedCluster(parent=None, birth_lambda=0.0)]
    root_node = 2 * n - 2

    def leaves_of(node):
        out = []
        stack = [node]
        while stack:
            m = stack.pop()
            if m < n:
                out.append(m)
            else:
                stack.extend(children[m - n])
        return out

    # stack entries: (dendrogram node, condensed cluster id); pushed nodes
    # always have size >= min_cluster >= 2, so they are merge nodes
    stack = [(root_node, 0)]
    while stack:
        node, cid = stack.pop()
        left, right = children[node - n]
        lam = 1.0 / max(heights[node - n], _MIN_DIST)
        big_left = sizes[left] >= min_cluster
        big_right = sizes[right] >= min_cluster
        if big_left and big_right:
            clusters[cid].split_lambda = lam
            for child in (left, right):
                clusters.append(_CondensedCluster(parent=cid, birth_lambda=lam))
                new_id = len(clusters) - 1
                clusters[cid].children.append(new_id)
                stack.append((child, new_id))
        elif big_left or big_right:
            big, small = (left, right) if big_left else (right, left)
            for p in leaves_of(small):
                clusters[cid].point_ids.append(p)
                clusters[cid].point_lambdas.append(lam)
            stack.append((big, cid))
        else:
            for p in leaves_of(node):
                clusters[cid].point_ids.append(p)
                clusters[cid].point_lambdas.append(lam)
    for c in clusters:
        c.size = len(c.point_ids)
    # propagate subtree sizes bottom-up (children were appended after parents)
    for i in range(len(clusters) - 1, 0, -1):
        clusters[clusters[i].parent].size += clusters[i].size
    return clusters


def _stability(clusters: list[_CondensedCluster]) -> list[float]:
    stab = []
    for c in clusters:
        s = sum(lam - c.birth_lambda for lam in c.point_lambdas)
        if c.split_lambda is not None:
            for ch in c.children:
                s += clusters[ch].size * (c.split_lambda - c.birth_lambda)
        stab.append(s)
    return stab


def _select_excess_of_mass(clusters, stability) -> list[int]:
    """Bottom-up: a cluster wins when at least as stable as its descendants."""
    n_clusters = len(clusters)
    selected = [False] * n_clusters
    subtree = list(stability)
    for i in range(n_clusters - 1, -1, -1):
        c = clusters[i]
        if not c.children:
            selected[i] = True
            continue
        child_total = sum(subtree[ch] for ch in c.children)
        if stability[i] >= child_total:
            selected[i] = True
            subtree[i] = stability[i]
        else:
            subtree[i] = child_total
    # parents come before children, so a selected cluster suppresses any
    # selected clusters deeper in its subtree
    result = []
    suppressed = [False] * n_clusters
    for i in range(n_clusters):
        if suppressed[i] or not selected[i]:
            continue
        result.append(i)
        stack = list(clusters[i].children)
        while stack:
            j = stack.pop()
            suppressed[j] = True
            stack.extend(clusters[j].children)
    return result


def _members(clusters, cid) -> list[int]:
    out = []
    stack = [cid]
    while stack:
        i = stack.pop()
        out.extend(clusters[i].point_ids)
        stack.extend(clusters[i].children)
    return out


def cluster_density(x: np.ndarray, min_cluster: int, min_samples: int | None = None) -> np.ndarray:
    """Label rows of x with cluster ids (0..K-1 by first-member order) or -1.

    Every returned cluster has at least min_cluster members. min_samples
    defaults to min_cluster.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if min_cluster < 2:
        raise ValueError("min_cluster must be >= 2")
    if n < min_cluster:
        raise TooFewPoints(f"{n} points < min_cluster {min_cluster}")
    if min_samples is None:
        min_samples = min_cluster

    dist = pairwise_distances(x)
    core = core_distances(dist, min_samples)
    mreach = mutual_reachability(dist, core)
    edges = minimum_spanning_tree(mreach)
    children, heights, sizes = _single_linkage(edges, n)
    clusters = _condense(children, heights, sizes, n, min_cluster)
    stability = _stability(clusters)
    chosen = _select_excess_of_mass(clusters, stability)

    labels = np.full(n, -1, dtype=np.int64)
    member_sets = [(min(m), m) for m in (_members(clusters, c) for c in chosen)]
    member_sets.sort(key=lambda t: t[0])
    for label, (_, members) in enumerate(member_sets):
        labels[members] = label
    return labels
