"""k-core peeling, edge coreness, closure-aware edge filtration and level extraction."""

from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from src.errors import DecompositionError, NotAnEdgeError
from src.graph import Graph, edge_subgraph, induced_subgraph

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 3


class SupportScope(StrEnum):
    """Where the common neighbors of a filtered edge are counted."""

    CORE = 'core'
    GRAPH = 'graph'


@dataclass(frozen=True, slots=True)
class CorenessMap:
    """Core number per node; ``v`` is in the ``k``-core iff ``core[v] >= k``."""

    core: np.ndarray

    @property
    def k_max(self) -> int:
        return int(self.core.max()) if self.core.size else 0

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.core >= k)


@dataclass(frozen=True, slots=True)
class EdgeScoreMap:
    """Integer score per edge, aligned with ``Graph.edges`` rows."""

    score: np.ndarray

    def of(self, g: Graph, u: int, v: int) -> int:
        eid = g.edge_id(u, v)
        if eid is None:
            raise NotAnEdgeError(u, v)
        return int(self.score[eid])


@dataclass(frozen=True, eq=False)
class Subgraph:
    """One edge-score level: a local graph plus its local-to-global node map."""

    level: int
    graph: Graph
    nodes: np.ndarray
    edge_ids: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    def local_index(self, v: int) -> int | None:
        pos = int(np.searchsorted(self.nodes, v))
        if pos < self.nodes.size and self.nodes[pos] == v:
            return pos
        return None

    def global_edges(self) -> list[tuple[int, int]]:
        return [(int(self.nodes[a]), int(self.nodes[b])) for a, b in self.graph.edges]


@dataclass(frozen=True)
class SubgraphFamily:
    """Edge partition of a graph into score levels, ascending by ``k``."""

    num_nodes: int
    num_edges: int
    levels: tuple[Subgraph, ...]

    def __iter__(self) -> Iterator[Subgraph]:
        return iter(self.levels)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def level_values(self) -> list[int]:
        return [sub.level for sub in self.levels]

    def get(self, k: int) -> Subgraph | None:
        for sub in self.levels:
            if sub.level == k:
                return sub
        return None

    def levels_containing(self, v: int) -> list[int]:
        return [sub.level for sub in self.levels if sub.local_index(v) is not None]

    def check_for(self, g: Graph) -> SubgraphFamily:
        covered = sum(sub.edge_ids.size for sub in self.levels)
        if self.num_nodes != g.num_nodes or self.num_edges != g.num_edges or covered != g.num_edges:
            raise DecompositionError(
                f'family ({self.num_nodes} nodes, {covered} edges) does not match graph '
                f'({g.num_nodes} nodes, {g.num_edges} edges)'
            )
        return self


@dataclass(frozen=True)
class Decomposition:
    """Everything the decomposition stage produces for one graph."""

    cores: CorenessMap
    coreness: EdgeScoreMap
    scores: EdgeScoreMap
    family: SubgraphFamily
    delta: int

    @property
    def demoted(self) -> np.ndarray:
        return np.flatnonzero(self.scores.score != self.coreness.score)


def core_numbers(g: Graph) -> CorenessMap:
    """Core numbers by bucket-queue peeling in O(V + E)."""
    n = g.num_nodes
    adjacency = g.adjacency_lists()
    deg = g.degrees().astype(np.int64).tolist()
    max_deg = max(deg, default=0)
    bins = [0] * (max_deg + 1)
    for d in deg:
        bins[d] += 1
    start = 0
    for d in range(max_deg + 1):
        bins[d], start = start, start + bins[d]
    pos = [0] * n
    vert = [0] * n
    for v in range(n):
        pos[v] = bins[deg[v]]
        vert[pos[v]] = v
        bins[deg[v]] += 1
    for d in range(max_deg, 0, -1):
        bins[d] = bins[d - 1]
    if bins:
        bins[0] = 0
    for i in range(n):
        v = vert[i]
        for u in adjacency[v]:
            if deg[u] > deg[v]:
                du, pu = deg[u], pos[u]
                pw = bins[du]
                w = vert[pw]
                if u != w:
                    pos[u], pos[w] = pw, pu
                    vert[pu], vert[pw] = w, u
                bins[du] += 1
                deg[u] -= 1
    return CorenessMap(core=np.asarray(deg, dtype=np.int64))


def k_core(g: Graph, cores: CorenessMap, k: int) -> tuple[Graph, np.ndarray]:
    """The ``k``-core as a node-induced subgraph with its local-to-global map."""
    return induced_subgraph(g, cores.members(k))


def edge_coreness(g: Graph, cores: CorenessMap) -> EdgeScoreMap:
    """``C(u, v) = min(core(u), core(v))``: the deepest core holding both endpoints."""
    if cores.core.shape[0] != g.num_nodes:
        raise DecompositionError('core map does not match graph')
    score = np.minimum(cores.core[g.edges[:, 0]], cores.core[g.edges[:, 1]])
    return EdgeScoreMap(score=score.astype(np.int64))


def triadic_support(
    g: Graph,
    u: int,
    v: int,
    *,
    cores: CorenessMap | None = None,
    k: int | None = None,
) -> int:
    """Common neighbors of an edge, optionally restricted to the ``k``-core."""
    if not g.has_edge(u, v):
        raise NotAnEdgeError(u, v)
    common = np.intersect1d(g.neighbors(u), g.neighbors(v), assume_unique=True)
    if cores is not None and k is not None:
        common = common[cores.core[common] >= k]
    return int(common.size)


def caef_filter(
    g: Graph,
    scores: EdgeScoreMap,
    delta: int,
    *,
    scope: SupportScope = SupportScope.CORE,
    cores: CorenessMap | None = None,
) -> EdgeScoreMap:
    """Demote zero-support edges with score ``k >= delta`` to ``k - 1`` in one pass.

    Support is read from the pre-filter scores only, so the pass never cascades.
    """
    if delta < 1:
        raise DecompositionError(f'delta must be at least 1: {delta}')
    if scope is SupportScope.CORE and cores is None:
        cores = core_numbers(g)
    filtered = scores.score.copy()
    for eid in np.flatnonzero(scores.score >= delta).tolist():
        u, v = (int(x) for x in g.edges[eid])
        k = int(scores.score[eid])
        support = triadic_support(
            g, u, v, cores=cores if scope is SupportScope.CORE else None, k=k
        )
        if support == 0:
            filtered[eid] = k - 1
    return EdgeScoreMap(score=filtered)


def extract_subgraphs(g: Graph, scores: EdgeScoreMap) -> SubgraphFamily:
    """One edge-induced subgraph per distinct score value."""
    if scores.score.shape[0] != g.num_edges:
        raise DecompositionError(
            f'{scores.score.shape[0]} scores for graph with {g.num_edges} edges'
        )
    levels = []
    for k in np.unique(scores.score).tolist():
        ids = np.flatnonzero(scores.score == k)
        local, nodes = edge_subgraph(g, ids)
        levels.append(Subgraph(level=int(k), graph=local, nodes=nodes, edge_ids=ids))
    return SubgraphFamily(num_nodes=g.num_nodes, num_edges=g.num_edges, levels=tuple(levels))


def decompose(
    g: Graph,
    delta: int = DEFAULT_DELTA,
    *,
    scope: SupportScope = SupportScope.CORE,
    apply_caef: bool = True,
) -> Decomposition:
    cores = core_numbers(g)
    coreness = edge_coreness(g, cores)
    scores = caef_filter(g, coreness, delta, scope=scope, cores=cores) if apply_caef else coreness
    family = extract_subgraphs(g, scores)
    result = Decomposition(
        cores=cores, coreness=coreness, scores=scores, family=family, delta=delta
    )
    logger.debug(
        'decomposed graph: k_max=%d levels=%s demoted=%d',
        cores.k_max,
        family.level_values,
        result.demoted.size,
    )
    return result
