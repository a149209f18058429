"""Immutable CSR graphs and the elementary structural algorithms built on them."""

from __future__ import annotations

import hashlib
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Final

import numpy as np

from src.errors import GraphError, NodeIndexError
from src.seeding import Stream, make_rng

UNREACHABLE: Final = -1
"""Distance sentinel for nodes in another component; never a valid hop count."""


@dataclass(frozen=True, slots=True, eq=False)
class Graph:
    """Undirected simple graph in CSR layout.

    ``edges`` holds each edge once as ``(u, v)`` with ``u < v``, sorted
    lexicographically; the row of an edge in ``edges`` is its edge id. Neighbor
    lists (``indices[indptr[u]:indptr[u + 1]]``) are sorted ascending.
    Use :func:`build_graph` rather than the constructor.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    edges: np.ndarray
    _edge_keys: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        keys = self.edges[:, 0] * max(self.num_nodes, 1) + self.edges[:, 1]
        object.__setattr__(self, '_edge_keys', keys)
        for array in (self.indptr, self.indices, self.edges, keys):
            array.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def neighbors(self, u: int) -> np.ndarray:
        self.check_node(u)
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def degree(self, u: int) -> int:
        self.check_node(u)
        return int(self.indptr[u + 1] - self.indptr[u])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def adjacency_lists(self) -> list[list[int]]:
        """Plain-Python neighbor lists for tight traversal loops."""
        return [
            self.indices[self.indptr[u] : self.indptr[u + 1]].tolist()
            for u in range(self.num_nodes)
        ]

    def edge_id(self, u: int, v: int) -> int | None:
        """Row of ``(u, v)`` in :attr:`edges`, or ``None`` for non-adjacent pairs."""
        self.check_node(u)
        self.check_node(v)
        if u == v:
            return None
        lo, hi = (u, v) if u < v else (v, u)
        key = lo * max(self.num_nodes, 1) + hi
        pos = int(np.searchsorted(self._edge_keys, key))
        if pos < self.num_edges and self._edge_keys[pos] == key:
            return pos
        return None

    def has_edge(self, u: int, v: int) -> bool:
        return self.edge_id(u, v) is not None

    def edge_list(self) -> list[tuple[int, int]]:
        return [(int(u), int(v)) for u, v in self.edges]

    def fingerprint(self) -> str:
        """Stable content hash (node count plus canonical edge array)."""
        digest = hashlib.sha256()
        digest.update(str(self.num_nodes).encode())
        digest.update(np.ascontiguousarray(self.edges, dtype=np.int64).tobytes())
        return digest.hexdigest()

    def same_structure(self, other: Graph) -> bool:
        return self.num_nodes == other.num_nodes and np.array_equal(self.edges, other.edges)

    def check_node(self, u: int) -> None:
        if not 0 <= u < self.num_nodes:
            raise NodeIndexError(int(u), self.num_nodes)


@dataclass(frozen=True, slots=True)
class NodeLabels:
    """Per-node class index in ``[0, num_classes)``."""

    labels: np.ndarray
    num_classes: int

    @classmethod
    def from_sequence(cls, values: Sequence[int], num_classes: int | None = None) -> NodeLabels:
        labels = np.asarray(values, dtype=np.int64).reshape(-1)
        if labels.size and labels.min() < 0:
            raise GraphError(f'negative class index {int(labels.min())}')
        inferred = int(labels.max()) + 1 if labels.size else 0
        classes = inferred if num_classes is None else num_classes
        if inferred > classes:
            raise GraphError(f'class index {inferred - 1} out of range for {classes} classes')
        labels.setflags(write=False)
        return cls(labels=labels, num_classes=classes)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def check_for(self, g: Graph) -> NodeLabels:
        if len(self) != g.num_nodes:
            raise GraphError(f'{len(self)} labels for graph with {g.num_nodes} nodes')
        return self


@dataclass(frozen=True, slots=True)
class NodeFeatures:
    """Dense ``num_nodes x d`` feature matrix."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2:
            raise GraphError(f'features must be 2-D, got shape {self.matrix.shape}')
        if not np.all(np.isfinite(self.matrix)):
            raise GraphError('features contain non-finite entries')

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def check_for(self, g: Graph) -> NodeFeatures:
        if self.matrix.shape[0] != g.num_nodes:
            raise GraphError(
                f'{self.matrix.shape[0]} feature rows for graph with {g.num_nodes} nodes'
            )
        return self


def build_graph(edge_list: Iterable[tuple[int, int]], num_nodes: int) -> Graph:
    """Build a graph, dropping self-loops and duplicate or reversed edges."""
    if num_nodes < 0:
        raise GraphError(f'num_nodes must be non-negative: {num_nodes}')
    pairs = np.asarray(list(edge_list), dtype=np.int64).reshape(-1, 2)
    bad = np.flatnonzero(((pairs < 0) | (pairs >= num_nodes)).any(axis=1))
    if bad.size:
        row = pairs[bad[0]]
        raise NodeIndexError((int(row[0]), int(row[1])), num_nodes)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    canonical = np.stack([pairs.min(axis=1), pairs.max(axis=1)], axis=1)
    edges = np.unique(canonical, axis=0) if canonical.size else canonical.reshape(0, 2)
    return _from_canonical_edges(edges, num_nodes)


def _from_canonical_edges(edges: np.ndarray, num_nodes: int) -> Graph:
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    counts = np.bincount(src, minlength=num_nodes)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return Graph(
        num_nodes=num_nodes,
        indptr=indptr,
        indices=dst[order].astype(np.int64),
        edges=np.ascontiguousarray(edges, dtype=np.int64),
    )


def bfs_distance(g: Graph, source: int) -> np.ndarray:
    """Hop distance from ``source``; nodes in other components get :data:`UNREACHABLE`."""
    g.check_node(source)
    dist = np.full(g.num_nodes, UNREACHABLE, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in g.neighbors(u):
            if dist[w] == UNREACHABLE:
                dist[w] = dist[u] + 1
                queue.append(int(w))
    return dist


def khop_neighborhood(g: Graph, v: int, k: int) -> frozenset[int]:
    """Nodes within ``k`` hops of ``v``, ``v`` included."""
    if k < 0:
        raise GraphError(f'hop count must be non-negative: {k}')
    g.check_node(v)
    seen = {v}
    frontier = [v]
    for _ in range(k):
        nxt = []
        for u in frontier:
            for w in g.neighbors(u).tolist():
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return frozenset(seen)


def connected_components(g: Graph) -> np.ndarray:
    """Component id per node, numbered in order of the smallest member."""
    comp = np.full(g.num_nodes, -1, dtype=np.int64)
    adjacency = g.adjacency_lists()
    current = 0
    for root in range(g.num_nodes):
        if comp[root] != -1:
            continue
        comp[root] = current
        stack = [root]
        while stack:
            u = stack.pop()
            for w in adjacency[u]:
                if comp[w] == -1:
                    comp[w] = current
                    stack.append(w)
        current += 1
    return comp


def find_bridges(g: Graph) -> list[tuple[int, int]]:
    """Edges whose removal disconnects their component (iterative low-link)."""
    adjacency = g.adjacency_lists()
    disc = [-1] * g.num_nodes
    low = [0] * g.num_nodes
    timer = 0
    bridges: list[tuple[int, int]] = []
    for root in range(g.num_nodes):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, 0)]
        while stack:
            node, parent, pos = stack[-1]
            nbrs = adjacency[node]
            if pos < len(nbrs):
                stack[-1] = (node, parent, pos + 1)
                w = nbrs[pos]
                if w == parent:
                    continue
                if disc[w] == -1:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, node, 0))
                else:
                    low[node] = min(low[node], disc[w])
                continue
            stack.pop()
            if parent != -1:
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    bridges.append((min(node, parent), max(node, parent)))
    return sorted(bridges)


def induced_subgraph(g: Graph, nodes: Iterable[int]) -> tuple[Graph, np.ndarray]:
    """Node-induced subgraph with dense local indices; returns ``(local, local_to_global)``."""
    members = np.unique(np.asarray(list(nodes), dtype=np.int64))
    if members.size and (members[0] < 0 or members[-1] >= g.num_nodes):
        raise NodeIndexError(int(members[-1]), g.num_nodes)
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[members] = np.arange(members.size)
    mapped = local[g.edges]
    keep = (mapped >= 0).all(axis=1)
    return _from_canonical_edges(mapped[keep], int(members.size)), members


def edge_subgraph(g: Graph, edge_ids: Sequence[int] | np.ndarray) -> tuple[Graph, np.ndarray]:
    """Edge-induced subgraph: nodes are exactly the endpoints of the chosen edges."""
    chosen = g.edges[np.sort(np.asarray(edge_ids, dtype=np.int64))]
    members = np.unique(chosen.reshape(-1))
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[members] = np.arange(members.size)
    return _from_canonical_edges(local[chosen].reshape(-1, 2), int(members.size)), members


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p) with one uniform draw per unordered pair, row by row.

    Draws do not depend on ``p``, so for a fixed seed the edge set for a smaller
    ``p`` is contained in the edge set for a larger one.
    """
    if not 0.0 <= p <= 1.0:
        raise GraphError(f'edge probability must lie in [0, 1]: {p}')
    if n < 0:
        raise GraphError(f'node count must be non-negative: {n}')
    rng = make_rng(seed, Stream.GENERATOR)
    blocks = []
    for u in range(n - 1):
        hits = np.flatnonzero(rng.random(n - u - 1) < p)
        if hits.size:
            blocks.append(np.stack([np.full(hits.size, u), hits + u + 1], axis=1))
    edges = np.concatenate(blocks) if blocks else np.empty((0, 2), dtype=np.int64)
    return _from_canonical_edges(edges.astype(np.int64), n)


def stochastic_block_model(
    sizes: Sequence[int], p_in: float, p_out: float, seed: int
) -> tuple[Graph, NodeLabels]:
    """Seeded SBM; labels are block indices in node order."""
    for prob in (p_in, p_out):
        if not 0.0 <= prob <= 1.0:
            raise GraphError(f'edge probability must lie in [0, 1]: {prob}')
    block = np.repeat(np.arange(len(sizes)), sizes)
    n = int(block.size)
    rng = make_rng(seed, Stream.GENERATOR)
    blocks = []
    for u in range(n - 1):
        others = np.arange(u + 1, n)
        prob = np.where(block[others] == block[u], p_in, p_out)
        hits = others[rng.random(others.size) < prob]
        if hits.size:
            blocks.append(np.stack([np.full(hits.size, u), hits], axis=1))
    edges = np.concatenate(blocks) if blocks else np.empty((0, 2), dtype=np.int64)
    return _from_canonical_edges(edges.astype(np.int64), n), NodeLabels.from_sequence(block)
