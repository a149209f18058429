import numpy as np
import pytest

from src.decomposition import (
    EdgeScoreMap,
    SupportScope,
    caef_filter,
    core_numbers,
    decompose,
    edge_coreness,
    extract_subgraphs,
    k_core,
    triadic_support,
)
from src.errors import DecompositionError, NotAnEdgeError
from src.graph import build_graph, erdos_renyi

TOY_CORES = [4, 4, 4, 4, 4, 2, 3, 3, 3, 3, 2, 2]


def _peeled_cores(g) -> list[int]:
    """Reference core numbers by repeatedly deleting low-degree nodes for each k."""
    adjacency = [set(nbrs) for nbrs in g.adjacency_lists()]
    core = [0] * g.num_nodes
    k = 1
    while True:
        alive = set(range(g.num_nodes))
        changed = True
        while changed:
            changed = False
            for v in list(alive):
                if len(adjacency[v] & alive) < k:
                    alive.discard(v)
                    changed = True
        if not alive:
            return core
        for v in alive:
            core[v] = k
        k += 1


def test_toy_core_numbers(toy_graph) -> None:
    cores = core_numbers(toy_graph)

    assert cores.core.tolist() == TOY_CORES
    assert cores.k_max == 4
    assert cores.members(3).tolist() == [0, 1, 2, 3, 4, 6, 7, 8, 9]


@pytest.mark.parametrize(
    ('n', 'p', 'seed'), [(30, 0.1, 0), (40, 0.2, 1), (25, 0.5, 2), (12, 0.0, 3)]
)
def test_core_numbers_match_peeling(n: int, p: float, seed: int) -> None:
    g = erdos_renyi(n, p, seed)

    assert core_numbers(g).core.tolist() == _peeled_cores(g)


@pytest.mark.slow
def test_core_numbers_match_peeling_on_corpus() -> None:
    rng = np.random.default_rng(7)
    for seed in range(200):
        n = int(rng.integers(1, 61))
        p = float(rng.choice([0.02, 0.05, 0.1, 0.2, 0.4, 0.7]))
        g = erdos_renyi(n, p, seed)
        assert core_numbers(g).core.tolist() == _peeled_cores(g), (n, p, seed)


def test_k_core_is_node_induced(toy_graph) -> None:
    local, nodes = k_core(toy_graph, core_numbers(toy_graph), 4)

    assert nodes.tolist() == [0, 1, 2, 3, 4]
    assert local.num_edges == 10


def test_edge_coreness_is_endpoint_minimum(toy_graph) -> None:
    cores = core_numbers(toy_graph)
    coreness = edge_coreness(toy_graph, cores)

    assert coreness.of(toy_graph, 3, 6) == 3
    assert coreness.of(toy_graph, 3, 5) == 2
    assert coreness.of(toy_graph, 0, 1) == 4
    for (u, v), score in zip(toy_graph.edge_list(), coreness.score, strict=True):
        assert score == min(TOY_CORES[u], TOY_CORES[v])
    with pytest.raises(NotAnEdgeError):
        coreness.of(toy_graph, 0, 11)


@pytest.mark.parametrize('seed', range(3))
def test_edge_coreness_survives_relabelling(seed: int) -> None:
    g = erdos_renyi(35, 0.15, seed)
    perm = np.random.default_rng(seed).permutation(g.num_nodes)
    moved = build_graph([(perm[u], perm[v]) for u, v in g.edge_list()], g.num_nodes)

    original = edge_coreness(g, core_numbers(g))
    relabelled = edge_coreness(moved, core_numbers(moved))

    for (u, v), score in zip(g.edge_list(), original.score, strict=True):
        assert relabelled.of(moved, int(perm[u]), int(perm[v])) == score


def test_triadic_support_respects_core_scope(toy_graph) -> None:
    cores = core_numbers(toy_graph)

    assert triadic_support(toy_graph, 3, 6) == 1
    assert triadic_support(toy_graph, 3, 6, cores=cores, k=3) == 0
    assert triadic_support(toy_graph, 0, 1, cores=cores, k=4) == 3


def test_caef_demotes_bridge_into_lower_level(toy_graph) -> None:
    result = decompose(toy_graph, 3)

    demoted = [toy_graph.edges[eid].tolist() for eid in result.demoted]
    assert demoted == [[3, 6]]
    assert result.scores.of(toy_graph, 3, 6) == 2
    assert result.family.level_values == [2, 3, 4]
    assert result.family.get(2).nodes.tolist() == [3, 5, 6, 10, 11]
    assert result.family.get(3).nodes.tolist() == [6, 7, 8, 9]
    assert result.family.get(4).nodes.tolist() == [0, 1, 2, 3, 4]
    assert result.family.levels_containing(3) == [2, 4]


def test_graph_scope_counts_every_common_neighbor(toy_graph) -> None:
    result = decompose(toy_graph, 3, scope=SupportScope.GRAPH)

    assert result.demoted.size == 0
    assert result.family.get(3).nodes.tolist() == [3, 6, 7, 8, 9]


def test_without_caef_levels_follow_coreness(toy_graph) -> None:
    result = decompose(toy_graph, 3, apply_caef=False)

    assert np.array_equal(result.scores.score, result.coreness.score)
    assert result.family.levels_containing(3) == [2, 3, 4]


def test_delta_above_k_max_leaves_scores_unchanged(toy_graph) -> None:
    result = decompose(toy_graph, 5)

    assert result.demoted.size == 0


def test_filter_reads_pre_filter_scores_only() -> None:
    # A path: every edge has coreness 1 and no support, so each drops exactly once.
    g = build_graph([(0, 1), (1, 2), (2, 3)], 4)
    coreness = edge_coreness(g, core_numbers(g))

    filtered = caef_filter(g, coreness, 1, scope=SupportScope.GRAPH)

    assert filtered.score.tolist() == [0, 0, 0]


@pytest.mark.parametrize('seed', range(4))
def test_caef_pass_is_repeatable_and_pure(seed: int) -> None:
    g = erdos_renyi(40, 0.2, seed)
    cores = core_numbers(g)
    pre = edge_coreness(g, cores)
    before = pre.score.copy()

    once = caef_filter(g, pre, 3)
    twice = caef_filter(g, pre, 3)

    assert np.array_equal(pre.score, before)
    assert np.array_equal(once.score, twice.score)
    first, second = extract_subgraphs(g, once), extract_subgraphs(g, twice)
    assert [s.edge_ids.tolist() for s in first] == [s.edge_ids.tolist() for s in second]
    assert sorted(np.concatenate([s.edge_ids for s in first]).tolist()) == list(range(g.num_edges))
    for (u, v), k, after in zip(g.edge_list(), pre.score, once.score, strict=True):
        support = triadic_support(g, u, v, cores=cores, k=int(k))
        assert after == (k - 1 if k >= 3 and support == 0 else k)


def test_caef_rejects_nonpositive_delta(toy_graph) -> None:
    coreness = edge_coreness(toy_graph, core_numbers(toy_graph))
    with pytest.raises(DecompositionError):
        caef_filter(toy_graph, coreness, 0)


def test_family_partitions_edges() -> None:
    g = erdos_renyi(50, 0.15, seed=7)
    family = decompose(g, 3).family

    ids = np.sort(np.concatenate([sub.edge_ids for sub in family]))
    assert ids.tolist() == list(range(g.num_edges))
    assert family.level_values == sorted(set(family.level_values))
    for sub in family:
        assert sub.graph.num_edges == sub.edge_ids.size
        assert set(sub.global_edges()) == {tuple(g.edges[e]) for e in sub.edge_ids.tolist()}


def test_empty_graph_has_no_levels() -> None:
    g = build_graph([], 4)
    result = decompose(g)

    assert len(result.family) == 0
    assert result.cores.core.tolist() == [0, 0, 0, 0]


def test_check_for_rejects_foreign_family(toy_graph) -> None:
    other = erdos_renyi(13, 0.3, seed=0)
    family = decompose(other).family

    with pytest.raises(DecompositionError):
        family.check_for(toy_graph)


def test_extract_subgraphs_checks_score_length(toy_graph) -> None:
    coreness = edge_coreness(toy_graph, core_numbers(toy_graph))
    short = EdgeScoreMap(score=coreness.score[:-1])

    with pytest.raises(DecompositionError):
        extract_subgraphs(toy_graph, short)
