"""Path-count density, homophily, bridge neighborhoods and core-growth studies."""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from src import autodiff as ad
from src.config import CacoseConfig
from src.datasets import synthesize_features
from src.decomposition import Subgraph, SubgraphFamily, core_numbers, decompose
from src.errors import EmptyGraphError, GraphError
from src.graph import (
    Graph,
    NodeLabels,
    build_graph,
    erdos_renyi,
    find_bridges,
    induced_subgraph,
    khop_neighborhood,
)
from src.layers import SagPool, adjacency_tensor
from src.seeding import Stream, make_rng

logger = logging.getLogger(__name__)

DEFAULT_HOPS = (4, 5)
DEFAULT_TOP_LEVELS = 3
DEFAULT_EDGE_BUDGET = 5_000_000
# (min nodes, max density) pairs, largest first
DENSITY_LIMITS = ((100_000, 0.10), (10_000, 0.25))


class PathMode(StrEnum):
    PATHS = 'paths'
    WALKS = 'walks'


def _simple_path_counts(adjacency: list[list[int]], v: int, n: int) -> list[int]:
    """``counts[j]`` = simple paths of exactly ``j`` edges starting at ``v``."""
    counts = [0] * (n + 1)
    on_path = [False] * len(adjacency)
    on_path[v] = True
    stack = [(v, 0)]
    while stack:
        node, pos = stack[-1]
        depth = len(stack) - 1
        nbrs = adjacency[node]
        if depth == n or pos >= len(nbrs):
            stack.pop()
            on_path[node] = False
            continue
        stack[-1] = (node, pos + 1)
        w = nbrs[pos]
        if on_path[w]:
            continue
        on_path[w] = True
        counts[depth + 1] += 1
        stack.append((w, 0))
    return counts


def _walk_counts(g: Graph, n: int) -> np.ndarray:
    """``out[j, v]`` = walks of ``j`` edges starting at ``v``."""
    rows = np.repeat(np.arange(g.num_nodes), np.diff(g.indptr))
    out = np.zeros((n + 1, g.num_nodes), dtype=np.int64)
    out[0] = 1
    for j in range(1, n + 1):
        np.add.at(out[j], rows, out[j - 1][g.indices])
    return out


def count_paths(
    g: Graph,
    v: int,
    n: int,
    *,
    mode: PathMode = PathMode.PATHS,
    cumulative: bool = False,
) -> int:
    """Simple paths (or walks) of exactly ``n`` edges from ``v``; ``<= n`` when cumulative."""
    if n < 1:
        raise GraphError(f'hop count must be at least 1: {n}')
    g.check_node(v)
    if PathMode(mode) is PathMode.WALKS:
        counts = _walk_counts(g, n)[:, v].tolist()
    else:
        counts = _simple_path_counts(g.adjacency_lists(), v, n)
    return int(sum(counts[1:])) if cumulative else int(counts[n])


def anp(
    g: Graph,
    n: int,
    *,
    mode: PathMode = PathMode.PATHS,
    cumulative: bool = False,
) -> float:
    """Mean of :func:`count_paths` over every node, isolated nodes included."""
    if n < 1:
        raise GraphError(f'hop count must be at least 1: {n}')
    if g.num_nodes == 0:
        raise EmptyGraphError('graph')
    if PathMode(mode) is PathMode.WALKS:
        walks = _walk_counts(g, n)
        per_node = walks[1:].sum(axis=0) if cumulative else walks[n]
        return float(per_node.sum()) / g.num_nodes
    adjacency = g.adjacency_lists()
    total = 0
    for v in range(g.num_nodes):
        counts = _simple_path_counts(adjacency, v, n)
        total += sum(counts[1:]) if cumulative else counts[n]
    return total / g.num_nodes


def homophilic_subgraph(g: Graph, labels: NodeLabels) -> Graph:
    """Same node set, same-label edges only."""
    labels.check_for(g)
    y = labels.labels
    keep = y[g.edges[:, 0]] == y[g.edges[:, 1]]
    return build_graph(g.edges[keep].tolist(), g.num_nodes)


def homophily_ratio(
    g: Graph, labels: NodeLabels, nodes: Sequence[int] | np.ndarray | None = None
) -> float | None:
    """Same-label edges over all edges inside ``nodes`` (whole graph when omitted).

    ``None`` when the node set induces no edges.
    """
    labels.check_for(g)
    edges = g.edges
    if nodes is not None:
        member = np.zeros(g.num_nodes, dtype=bool)
        member[np.asarray(nodes, dtype=np.int64)] = True
        edges = edges[member[edges[:, 0]] & member[edges[:, 1]]]
    if edges.shape[0] == 0:
        return None
    y = labels.labels
    return float(np.mean(y[edges[:, 0]] == y[edges[:, 1]]))


@dataclass(frozen=True, slots=True)
class AnpRecord:
    graph_id: str
    variant: str
    level: int | None
    hop: int
    anp: float
    num_nodes: int
    num_edges: int


@dataclass(frozen=True, slots=True)
class RatioRecord:
    """Homophilic over total ANP, before and after pooling, for one level."""

    graph_id: str
    level: int | None
    hop: int
    unpooled_ratio: float | None
    pooled_ratio: float | None


@dataclass
class PilotReport:
    records: list[AnpRecord] = field(default_factory=list)
    ratios: list[RatioRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _ratio(numerator: float, denominator: float) -> float | None:
    return numerator / denominator if denominator > 0 else None


def pool_subgraph(g: Graph, sub: Subgraph, config: CacoseConfig) -> tuple[Graph, np.ndarray]:
    """Nodes kept by an untrained, seed-fixed SAGPool; returns the induced subgraph.

    The second element maps pooled-local indices to ``sub``-local indices.
    """
    x = synthesize_features(g, config.feature_kind, config.max_degree_feature)
    rng = make_rng(config.seed, Stream.POOL, sub.level)
    pool = SagPool.create(
        f'pilot{sub.level}',
        x.dim,
        x.dim,
        config.pooling_ratio,
        rng,
        activation=config.pool_activation,
    )
    result = pool(adjacency_tensor(sub), ad.constant(x.matrix[sub.nodes]))
    return induced_subgraph(sub.graph, result.selected)


def pilot_study(
    g: Graph,
    labels: NodeLabels,
    config: CacoseConfig,
    *,
    top_levels: int = DEFAULT_TOP_LEVELS,
    hops: Sequence[int] = DEFAULT_HOPS,
    mode: PathMode = PathMode.PATHS,
    cumulative: bool = False,
    apply_caef: bool = False,
    graph_id: str = 'graph',
) -> PilotReport:
    """ANP of the graph, its top coreness levels and their pooled versions.

    Each variant is paired with its homophilic counterpart. Levels come from the
    unfiltered edge coreness unless ``apply_caef`` is set.
    """
    if top_levels < 1:
        raise GraphError(f'top_levels must be at least 1: {top_levels}')
    labels.check_for(g)
    report = PilotReport()
    family = decompose(g, config.delta, scope=config.support_scope, apply_caef=apply_caef).family
    chosen = list(family.levels[-top_levels:])[::-1]
    if len(chosen) < top_levels:
        message = f'{graph_id}: requested {top_levels} levels, only {len(chosen)} available'
        logger.warning(message)
        report.warnings.append(message)

    def measure(variant: str, level: int | None, graph: Graph, hop: int) -> float:
        value = anp(graph, hop, mode=mode, cumulative=cumulative) if graph.num_nodes else 0.0
        report.records.append(
            AnpRecord(graph_id, variant, level, hop, value, graph.num_nodes, graph.num_edges)
        )
        return value

    def pair(
        name: str, level: int | None, graph: Graph, y: np.ndarray, hop: int
    ) -> tuple[float, float]:
        base = measure(name, level, graph, hop)
        local = NodeLabels.from_sequence(y, labels.num_classes)
        homophilic = measure(f'homophilic-{name}', level, homophilic_subgraph(graph, local), hop)
        return base, homophilic

    pooled = [pool_subgraph(g, sub, config) for sub in chosen]
    for hop in hops:
        base, homophilic = pair('original', None, g, labels.labels, hop)
        report.ratios.append(RatioRecord(graph_id, None, hop, _ratio(homophilic, base), None))
        for sub, (pooled_graph, local) in zip(chosen, pooled, strict=True):
            y_sub = labels.labels[sub.nodes]
            core, core_h = pair(f'core-{sub.level}', sub.level, sub.graph, y_sub, hop)
            pool_base, pool_h = pair(
                f'pooled-{sub.level}', sub.level, pooled_graph, y_sub[local], hop
            )
            report.ratios.append(
                RatioRecord(
                    graph_id, sub.level, hop, _ratio(core_h, core), _ratio(pool_h, pool_base)
                )
            )
    return report


@dataclass(frozen=True, slots=True)
class BridgeRecord:
    """Label histograms around one bridge, in the whole graph or one level."""

    edge: tuple[int, int]
    context: str
    u_histogram: tuple[int, ...]
    v_histogram: tuple[int, ...]
    histogram: tuple[int, ...]
    u_size: int
    v_size: int
    size: int
    homophily: float | None


def _histogram(y: np.ndarray, members: Sequence[int], num_classes: int) -> tuple[int, ...]:
    counts = np.bincount(y[np.asarray(members, dtype=np.int64)], minlength=num_classes)
    return tuple(int(c) for c in counts)


def _bridge_record(
    graph: Graph,
    y: np.ndarray,
    num_classes: int,
    endpoints: tuple[int, int],
    edge: tuple[int, int],
    context: str,
) -> BridgeRecord:
    u, v = endpoints
    u_hood = sorted(khop_neighborhood(graph, u, 2))
    v_hood = sorted(khop_neighborhood(graph, v, 2))
    union = sorted(set(u_hood) | set(v_hood))
    local = NodeLabels.from_sequence(y, num_classes)
    return BridgeRecord(
        edge=edge,
        context=context,
        u_histogram=_histogram(y, u_hood, num_classes),
        v_histogram=_histogram(y, v_hood, num_classes),
        histogram=_histogram(y, union, num_classes),
        u_size=len(u_hood),
        v_size=len(v_hood),
        size=len(union),
        homophily=homophily_ratio(graph, local, union),
    )


def bridge_analysis(g: Graph, labels: NodeLabels, family: SubgraphFamily) -> list[BridgeRecord]:
    """Two-hop label histograms for every bridge, in ``g`` and in each level holding it."""
    labels.check_for(g)
    family.check_for(g)
    y = labels.labels
    records = []
    for u, v in find_bridges(g):
        records.append(_bridge_record(g, y, labels.num_classes, (u, v), (u, v), 'original'))
        eid = g.edge_id(u, v)
        for sub in family:
            if eid not in sub.edge_ids:
                continue
            local = (sub.local_index(u), sub.local_index(v))
            context = f'level-{sub.level}'
            records.append(
                _bridge_record(sub.graph, y[sub.nodes], labels.num_classes, local, (u, v), context)
            )
    return records


@dataclass(frozen=True, slots=True)
class ScalabilityRecord:
    """One (n, p) point; ``skipped`` names the guard rail when the graph was not built."""

    n: int
    p: float
    seed: int
    edges: int | None
    k_max: int | None
    max_degree: int | None
    levels: int | None
    demoted: int | None
    elapsed: float | None
    skipped: str | None = None


def density_limit(n: int) -> float:
    for min_nodes, limit in DENSITY_LIMITS:
        if n >= min_nodes:
            return limit
    return 1.0


def scalability_study(
    sizes: Sequence[int],
    densities: Sequence[float],
    seed: int,
    delta: int | None = None,
    *,
    edge_budget: int = DEFAULT_EDGE_BUDGET,
) -> list[ScalabilityRecord]:
    """Maximum core value of seeded G(n, p) graphs over a size/density grid.

    With ``delta`` set the closure-aware filtration also runs and the level and
    demotion counts are recorded.
    """
    if not sizes or not densities:
        raise GraphError('sizes and densities must be nonempty')
    records = []
    for n in sizes:
        for p in densities:
            if not 0.0 <= p <= 1.0:
                raise GraphError(f'edge probability must lie in [0, 1]: {p}')
            reason = None
            if p > density_limit(n):
                reason = f'density {p} above {density_limit(n)} for n={n}'
            elif p * n * (n - 1) / 2 > edge_budget:
                reason = f'expected edges exceed budget {edge_budget}'
            if reason is not None:
                logger.warning('skipping n=%d p=%s: %s', n, p, reason)
                records.append(
                    ScalabilityRecord(n, p, seed, None, None, None, None, None, None, reason)
                )
                continue
            started = time.perf_counter()
            g = erdos_renyi(n, p, seed)
            cores = core_numbers(g)
            levels = demoted = None
            if delta is not None:
                result = decompose(g, delta)
                levels, demoted = len(result.family), int(result.demoted.size)
            elapsed = time.perf_counter() - started
            max_degree = int(g.degrees().max()) if n else 0
            records.append(
                ScalabilityRecord(
                    n, p, seed, g.num_edges, cores.k_max, max_degree, levels, demoted, elapsed
                )
            )
            logger.info('n=%d p=%s edges=%d k_max=%d', n, p, g.num_edges, cores.k_max)
    return records
