"""Constraint graphs: the edge sets on which Lipschitz constraints are enforced."""

import heapq
import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree, shortest_path
from scipy.spatial import cKDTree

from .core import pairwise_distances


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConstraintGraph:
    """Undirected edge list over ``n`` vertices with per-edge radii ``L * |x_i - x_j|``.

    ``edges`` is an (m, 2) integer array with ``i < j`` in every row, sorted
    lexicographically; ``lengths`` holds the input-space distances and
    ``radii`` the corresponding label-space budgets.
    """
    n: int
    edges: np.ndarray
    lengths: np.ndarray
    lipschitz: float

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)
        lengths = np.asarray(self.lengths, dtype=np.float64).reshape(-1)
        if len(edges) != len(lengths):
            raise GraphError('one length per edge is required')
        if len(edges):
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise GraphError('edges must satisfy i < j (no self-loops)')
            if edges.min() < 0 or edges.max() >= self.n:
                raise GraphError('edge endpoint out of range')
            if len(np.unique(edges, axis=0)) != len(edges):
                raise GraphError('duplicate edges')
            if np.any(lengths <= 0):
                raise GraphError('every edge must join two distinct points')
        if not self.lipschitz > 0:
            raise GraphError('Lipschitz constant must be positive')
        edges.setflags(write=False)
        lengths.setflags(write=False)
        object.__setattr__(self, 'edges', edges)
        object.__setattr__(self, 'lengths', lengths)

    @property
    def m(self):
        return len(self.edges)

    @property
    def radii(self):
        return self.lipschitz * self.lengths

    def with_lipschitz(self, L):
        return ConstraintGraph(self.n, self.edges, self.lengths, L)

    def is_connected(self):
        if self.n <= 1:
            return True
        return connected_components(self.adjacency(), directed=False)[0] == 1

    def adjacency(self, weights=None):
        w = self.lengths if weights is None else np.asarray(weights, dtype=np.float64)
        i, j = self.edges[:, 0], self.edges[:, 1]
        return coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])),
                          shape=(self.n, self.n)).tocsr()

    def edge_set(self):
        return {(int(i), int(j)) for i, j in self.edges}

    def to_json(self):
        return json.dumps({
            'n': self.n, 'lipschitz': self.lipschitz,
            'edges': self.edges.tolist(), 'radii': self.radii.tolist(),
        })


def graph_from_edges(points, edges, L):
    """Build a graph over the rows of ``points`` from an arbitrary pair list."""
    points = np.asarray(points, dtype=np.float64)
    pairs = np.sort(np.asarray(edges, dtype=np.intp).reshape(-1, 2), axis=1)
    pairs = np.unique(pairs, axis=0)
    lengths = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    return ConstraintGraph(len(points), pairs, lengths, float(L))


def _points(data):
    return np.asarray(getattr(data, 'X', data), dtype=np.float64)


def complete_graph(data, L):
    """All ``n(n-1)/2`` pairs; enforcing these is the exact Lipschitz problem."""
    X = _points(data)
    i, j = np.triu_indices(len(X), k=1)
    return graph_from_edges(X, np.column_stack([i, j]), L)


def _mst_edges(X):
    n = len(X)
    if n <= 1:
        return np.empty((0, 2), dtype=np.intp)
    if n <= 2000:
        D = pairwise_distances(X)
    else:
        # sparse candidate set; connectivity is checked by the caller
        k = min(n - 1, 32)
        dist, idx = cKDTree(X).query(X, k=k + 1)
        rows = np.repeat(np.arange(n), k)
        D = coo_matrix((dist[:, 1:].ravel(), (rows, idx[:, 1:].ravel())), shape=(n, n))
    tree = minimum_spanning_tree(D).tocoo()
    return np.column_stack([tree.row, tree.col])


def knn_graph(data, L, k):
    """Symmetrized k-nearest-neighbour graph augmented with a Euclidean MST.

    Each vertex keeps edges to its ``k`` nearest neighbours (so its degree is
    at least ``k``); the MST edges guarantee the result is connected.
    """
    X = _points(data)
    n = len(X)
    if not 1 <= k < n:
        raise GraphError(f'k must satisfy 1 <= k < n, got k={k}, n={n}')
    _, idx = cKDTree(X).query(X, k=k + 1)
    idx = idx[:, 1:] if idx.ndim == 2 else idx[:, None]
    rows = np.repeat(np.arange(n), k)
    pairs = np.vstack([np.column_stack([rows, idx.ravel()]), _mst_edges(X)])
    G = graph_from_edges(X, pairs, L)
    if not G.is_connected():
        raise GraphError('k-NN graph is not connected after MST augmentation')
    return G


def _bounded_dijkstra(adj, source, target, bound):
    """Shortest path length from source to target, or inf if it exceeds ``bound``."""
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == target:
            return d
        if d > dist.get(u, np.inf) or d > bound:
            continue
        for v, w in adj[u]:
            nd = d + w
            if nd <= bound and nd < dist.get(v, np.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return np.inf


def greedy_spanner(data, L, stretch):
    """Greedy geometric spanner with the given stretch factor ``1 + eps``.

    Pairs are scanned by increasing distance and an edge is added whenever the
    current graph distance between its endpoints exceeds ``stretch`` times
    their Euclidean distance.
    """
    if not stretch > 1:
        raise GraphError(f'stretch must exceed 1, got {stretch}')
    X = _points(data)
    n = len(X)
    D = pairwise_distances(X)
    i, j = np.triu_indices(n, k=1)
    d = D[i, j]
    order = np.lexsort((j, i, d))
    adj = [[] for _ in range(n)]
    chosen = []
    for e in order:
        u, v, duv = int(i[e]), int(j[e]), float(d[e])
        if _bounded_dijkstra(adj, u, v, stretch * duv) > stretch * duv:
            adj[u].append((v, duv))
            adj[v].append((u, duv))
            chosen.append((u, v))
    edges = np.array(chosen, dtype=np.intp).reshape(-1, 2)
    return graph_from_edges(X, edges, L)


def build_graph(data, L, policy='complete'):
    """Construct a graph from a policy string: ``complete``, ``knn:K`` or ``spanner:EPS``."""
    name, _, arg = str(policy).partition(':')
    name = name.strip().lower()
    n = len(_points(data))
    if name == 'complete':
        return complete_graph(data, L)
    if name == 'knn':
        k = int(arg) if arg else 16
        return knn_graph(data, L, min(k, n - 1)) if n > 1 else complete_graph(data, L)
    if name == 'spanner':
        eps = float(arg) if arg else 0.1
        return greedy_spanner(data, L, 1.0 + eps)
    raise GraphError(f'unknown graph policy {policy!r}')


def max_stretch(graph, points):
    """Worst ratio of graph distance to Euclidean distance over all vertex pairs."""
    X = _points(points)
    if graph.n <= 1:
        return 1.0
    SP = shortest_path(graph.adjacency(), method='D', directed=False)
    D = pairwise_distances(X)
    i, j = np.triu_indices(graph.n, k=1)
    return float(np.max(SP[i, j] / D[i, j]))
