"""Sparse undirected graphs: CSR storage, normalization, propagation, homophily."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse as sp


class GraphError(ValueError):
    pass


@dataclass
class CsrGraph:
    """Symmetric graph in compressed sparse row form.

    ``weights`` is None for the raw unweighted graph and holds the normalized
    self-looped entries after :func:`normalize_adjacency`.
    """

    n_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    weights: np.ndarray | None = None

    @property
    def n_edges(self) -> int:
        """Number of undirected edges (self-loops counted once)."""
        rows = np.repeat(np.arange(self.n_nodes), np.diff(self.row_offsets))
        diag = int((rows == self.col_indices).sum())
        return (len(self.col_indices) - diag) // 2 + diag

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def to_scipy(self) -> sp.csr_matrix:
        data = self.weights if self.weights is not None \
            else np.ones(len(self.col_indices))
        return sp.csr_matrix((data, self.col_indices, self.row_offsets),
                             shape=(self.n_nodes, self.n_nodes))


def build_graph(edges, n_nodes: int) -> CsrGraph:
    """Build a symmetric, deduplicated CSR graph from an undirected edge list.

    Self-edges in the input are dropped; normalization re-adds exactly one
    self-loop per node later.
    """
    src, dst = [], []
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n_nodes and 0 <= v < n_nodes):
            raise GraphError(f"edge ({u}, {v}) references a node outside [0, {n_nodes})")
        if u == v:
            continue
        src.append(u)
        dst.append(v)
    if src:
        rows = np.array(src + dst)
        cols = np.array(dst + src)
        coo = sp.coo_matrix((np.ones(len(rows)), (rows, cols)),
                            shape=(n_nodes, n_nodes))
        csr = coo.tocsr()
        csr.data[:] = 1.0  # collapse duplicate entries
        csr.sum_duplicates()
        csr.sort_indices()
        return CsrGraph(n_nodes, csr.indptr.copy(), csr.indices.copy())
    return CsrGraph(n_nodes, np.zeros(n_nodes + 1, dtype=np.int32),
                    np.array([], dtype=np.int32))


def normalize_adjacency(graph: CsrGraph) -> CsrGraph:
    """Symmetric renormalization with self-loops.

    Returns the weighted CSR of D^{-1/2} (A + I) D^{-1/2} where D is the
    degree matrix of A + I. Isolated nodes end up with a single weight-1
    self-loop.
    """
    if graph.weights is not None:
        raise GraphError("expected an unweighted graph")
    adj = graph.to_scipy()
    eye = sp.identity(graph.n_nodes, format="csr")
    hat = (adj + eye).tocsr()
    deg = np.asarray(hat.sum(axis=1)).reshape(-1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    norm = sp.diags(inv_sqrt) @ hat @ sp.diags(inv_sqrt)
    norm = norm.tocsr()
    norm.sort_indices()
    return CsrGraph(graph.n_nodes, norm.indptr.copy(), norm.indices.copy(),
                    norm.data.copy())


@dataclass
class PropagationCache:
    """Powers of the normalized adjacency applied to a feature matrix.

    ``matrices[k]`` holds the features propagated k hops; index 0 is the
    input matrix itself, and the deepest entry is k_max + 1 (one past the
    largest rounded hop, for the fractional blend).
    """

    k_max: int
    matrices: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.matrices) - 1


def build_propagation_cache(graph: CsrGraph, features: np.ndarray,
                            k_max: int) -> PropagationCache:
    if graph.weights is None:
        raise GraphError("propagation requires a normalized (weighted) graph")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] != graph.n_nodes:
        raise GraphError(
            f"feature rows {features.shape[0]} != node count {graph.n_nodes}")
    adj = graph.to_scipy()
    mats = [features]
    for _ in range(k_max + 1):
        mats.append(adj @ mats[-1])
    return PropagationCache(k_max=k_max, matrices=mats)


def khop_neighborhood(graph: CsrGraph, v: int, k: int) -> set[int]:
    """Nodes at shortest-path distance 1..k from v (v itself excluded)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0 <= v < graph.n_nodes:
        raise GraphError(f"node {v} outside [0, {graph.n_nodes})")
    seen = {v}
    result: set[int] = set()
    frontier = deque([(v, 0)])
    while frontier:
        node, dist = frontier.popleft()
        if dist == k:
            continue
        for u in graph.neighbors(node):
            u = int(u)
            if u not in seen:
                seen.add(u)
                result.add(u)
                frontier.append((u, dist + 1))
    result.discard(v)
    return result


def edge_homophily(graph: CsrGraph, labels: np.ndarray) -> float:
    """Fraction of undirected edges joining same-label endpoints.

    Self-loops never count; a graph with no off-diagonal edges has no defined
    homophily and is rejected.
    """
    labels = np.asarray(labels)
    if labels.shape[0] != graph.n_nodes:
        raise GraphError(
            f"labels cover {labels.shape[0]} nodes, graph has {graph.n_nodes}")
    rows = np.repeat(np.arange(graph.n_nodes), np.diff(graph.row_offsets))
    cols = graph.col_indices
    upper = cols > rows  # each undirected edge once; skips self-loops too
    total = int(upper.sum())
    if total == 0:
        raise GraphError("homophily is undefined on a graph with no edges")
    same = int((labels[rows[upper]] == labels[cols[upper]]).sum())
    return same / total
