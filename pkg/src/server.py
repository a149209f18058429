"""FastMCP server exposing decomposition, curvature, ANP and core-growth tools."""

from __future__ import annotations

import asyncio
import logging
from collections.abc import Iterator
from contextlib import contextmanager
from typing import Annotated, Any, Awaitable, Callable

from fastmcp import FastMCP
from fastmcp.exceptions import ToolError
from pydantic import Field

from src.analysis import PathMode, anp, homophilic_subgraph, homophily_ratio, scalability_study
from src.cache import TTLCache, decomposition_key
from src.config import ServerConfig
from src.curvature import EdgeSelection, curvature_table
from src.decomposition import Decomposition, SupportScope, decompose
from src.errors import CacoseError
from src.graph import Graph, NodeLabels, build_graph

logger = logging.getLogger(__name__)

EdgesParam = Annotated[
    list[tuple[int, int]],
    Field(description='Undirected edges as [u, v] pairs of 0-based node ids.'),
]
NumNodesParam = Annotated[
    int | None,
    Field(default=None, ge=0, description='Node count; defaults to the largest id plus one.'),
]
DeltaParam = Annotated[int, Field(ge=1, description='CaEF threshold: filter levels k >= delta.')]


@contextmanager
def _tool_errors() -> Iterator[None]:
    try:
        yield
    except CacoseError as exc:
        raise ToolError(f'{type(exc).__name__}: {exc}') from exc


def _graph(edges: list[tuple[int, int]], num_nodes: int | None, max_nodes: int) -> Graph:
    if num_nodes is None:
        num_nodes = max((max(u, v) for u, v in edges), default=-1) + 1
    if num_nodes > max_nodes:
        raise ToolError(f'graph has {num_nodes} nodes; this server accepts at most {max_nodes}')
    with _tool_errors():
        return build_graph(edges, num_nodes)


def _decomposition_payload(result: Decomposition, cached: bool) -> dict[str, Any]:
    return {
        'cached': cached,
        'delta': result.delta,
        'k_max': result.cores.k_max,
        'cores': result.cores.core.tolist(),
        'demoted': len(result.demoted),
        'levels': [
            {
                'level': sub.level,
                'nodes': sub.nodes.tolist(),
                'edges': [list(edge) for edge in sub.global_edges()],
            }
            for sub in result.family
        ],
    }


def create_server(config: ServerConfig | None = None) -> FastMCP:
    """Create and configure the FastMCP server for the cacose analysis tools.

    Args:
        config: Server settings. If None, they are read from the environment.

    Returns:
        Configured FastMCP server instance ready to serve MCP clients.

    Example:
        >>> server = create_server(ServerConfig(cache_ttl=60.0))
        >>> server.run()
    """

    config = config or ServerConfig.from_env()
    cache = TTLCache(config.cache_ttl, config.cache_maxsize)

    mcp = FastMCP(name='cacose')

    def register_tool(
        *,
        name: str,
        description: str,
    ) -> Callable[
        [Callable[..., Awaitable[dict[str, Any]]]], Callable[..., Awaitable[dict[str, Any]]]
    ]:
        def decorator(
            func: Callable[..., Awaitable[dict[str, Any]]],
        ) -> Callable[..., Awaitable[dict[str, Any]]]:
            return mcp.tool(
                name=name,
                description=description,
                annotations={'readOnlyHint': True, 'idempotentHint': True},
            )(func)

        return decorator

    @register_tool(
        name='cacose_decompose',
        description=(
            'Split a graph into edge-coreness levels after closure-aware edge filtration. '
            'Returns core numbers, the maximum core value and each level with its nodes '
            'and edges. Results are cached per graph and settings.'
        ),
    )
    async def cacose_decompose(
        edges: EdgesParam,
        num_nodes: NumNodesParam = None,
        delta: DeltaParam = 3,
        scope: SupportScope = SupportScope.CORE,
        apply_caef: bool = True,
    ) -> dict[str, Any]:
        g = _graph(edges, num_nodes, config.max_nodes)
        key = decomposition_key(g, delta, scope, apply_caef)
        with _tool_errors():
            result, cached = await cache.get_or_compute(
                key, lambda: decompose(g, delta, scope=scope, apply_caef=apply_caef)
            )
        logger.debug('decompose %s cached=%s', key, cached)
        return _decomposition_payload(result, cached)

    @register_tool(
        name='cacose_curvature',
        description=(
            'Exact Ollivier-Ricci curvature with uniform walk measures for every edge, or '
            "only for edges whose endpoints share no neighbor ('zero-support'). Reports "
            'how many zero-support edges have positive curvature.'
        ),
    )
    async def cacose_curvature(
        edges: EdgesParam,
        num_nodes: NumNodesParam = None,
        selection: EdgeSelection = EdgeSelection.ALL,
    ) -> dict[str, Any]:
        g = _graph(edges, num_nodes, config.max_nodes)
        with _tool_errors():
            results = await asyncio.to_thread(curvature_table, g, selection)
        rows = [
            {'u': r.edge[0], 'v': r.edge[1], 'support': r.support, 'w1': r.w1, 'kappa': r.kappa}
            for r in results
        ]
        violations = sum(1 for r in results if r.support == 0 and r.kappa > 1e-9)
        return {'edges': rows, 'violations': violations}

    @register_tool(
        name='cacose_anp',
        description=(
            'Average number of simple paths (or walks) of a given hop length per node. '
            'With node labels, also reports the same measure on the same-label subgraph '
            'and the edge homophily ratio.'
        ),
    )
    async def cacose_anp(
        edges: EdgesParam,
        num_nodes: NumNodesParam = None,
        hops: Annotated[int, Field(ge=1, le=8, description='Path length in edges.')] = 4,
        mode: PathMode = PathMode.PATHS,
        cumulative: bool = False,
        labels: list[int] | None = None,
    ) -> dict[str, Any]:
        g = _graph(edges, num_nodes, config.max_nodes)
        with _tool_errors():
            value = await asyncio.to_thread(anp, g, hops, mode=mode, cumulative=cumulative)
        payload: dict[str, Any] = {'hops': hops, 'anp': value}
        if labels is not None:
            with _tool_errors():
                y = NodeLabels.from_sequence(labels).check_for(g)
            h = homophilic_subgraph(g, y)
            payload['homophilic_anp'] = await asyncio.to_thread(
                anp, h, hops, mode=mode, cumulative=cumulative
            )
            payload['homophily'] = homophily_ratio(g, y)
        return payload

    @register_tool(
        name='cacose_scalability',
        description=(
            'Generate seeded Erdos-Renyi graphs over a grid of sizes and densities and '
            'report edge counts and the maximum core value for each point.'
        ),
    )
    async def cacose_scalability(
        sizes: list[int],
        densities: list[float],
        seed: Annotated[int, Field(ge=0)] = 0,
        delta: Annotated[int | None, Field(default=None, ge=1)] = None,
    ) -> dict[str, Any]:
        too_big = [n for n in sizes if n > config.max_nodes]
        if too_big:
            raise ToolError(f'sizes {too_big} exceed the {config.max_nodes}-node limit')
        with _tool_errors():
            records = await asyncio.to_thread(scalability_study, sizes, densities, seed, delta)
        return {
            'records': [
                {
                    'n': r.n,
                    'p': r.p,
                    'edges': r.edges,
                    'k_max': r.k_max,
                    'max_degree': r.max_degree,
                    'levels': r.levels,
                    'skipped': r.skipped,
                }
                for r in records
            ]
        }

    return mcp
