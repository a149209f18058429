import numpy as np
import pytest

from src.errors import GraphError, NodeIndexError
from src.graph import (
    UNREACHABLE,
    NodeFeatures,
    NodeLabels,
    bfs_distance,
    build_graph,
    connected_components,
    edge_subgraph,
    erdos_renyi,
    find_bridges,
    induced_subgraph,
    khop_neighborhood,
    stochastic_block_model,
)


def test_build_graph_canonicalizes_edges() -> None:
    g = build_graph([(2, 1), (1, 2), (0, 1), (3, 3), (1, 0)], 4)

    assert g.num_nodes == 4
    assert g.edge_list() == [(0, 1), (1, 2)]
    assert g.neighbors(1).tolist() == [0, 2]
    assert g.degree(3) == 0
    assert g.degrees().tolist() == [1, 2, 1, 0]


def test_build_graph_rejects_out_of_range_endpoint() -> None:
    with pytest.raises(NodeIndexError) as info:
        build_graph([(0, 1), (1, 5)], 3)

    assert info.value.item == (1, 5)
    assert info.value.num_nodes == 3


def test_edge_ids_follow_sorted_edge_rows(toy_graph) -> None:
    for eid, (u, v) in enumerate(toy_graph.edge_list()):
        assert toy_graph.edge_id(u, v) == eid
        assert toy_graph.edge_id(v, u) == eid
    assert toy_graph.edge_id(0, 11) is None
    assert toy_graph.edge_id(4, 4) is None


def test_graph_arrays_are_read_only(toy_graph) -> None:
    with pytest.raises(ValueError):
        toy_graph.edges[0, 0] = 7


def test_fingerprint_ignores_input_order() -> None:
    a = build_graph([(0, 1), (1, 2)], 3)
    b = build_graph([(2, 1), (1, 0)], 3)
    c = build_graph([(0, 1), (1, 2)], 4)

    assert a.fingerprint() == b.fingerprint()
    assert a.same_structure(b)
    assert a.fingerprint() != c.fingerprint()


def test_bfs_distance_marks_other_components() -> None:
    g = build_graph([(0, 1), (1, 2), (3, 4)], 5)

    assert bfs_distance(g, 0).tolist() == [0, 1, 2, UNREACHABLE, UNREACHABLE]
    assert connected_components(g).tolist() == [0, 0, 0, 1, 1]


def test_khop_neighborhood(toy_graph) -> None:
    assert khop_neighborhood(toy_graph, 10, 0) == frozenset({10})
    assert khop_neighborhood(toy_graph, 10, 1) == frozenset({5, 10, 11})
    assert khop_neighborhood(toy_graph, 10, 2) == frozenset({3, 5, 6, 10, 11})
    with pytest.raises(GraphError):
        khop_neighborhood(toy_graph, 0, -1)


def test_find_bridges() -> None:
    path = build_graph([(0, 1), (1, 2), (2, 3)], 4)
    barbell = build_graph([(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)], 6)

    assert find_bridges(path) == [(0, 1), (1, 2), (2, 3)]
    assert find_bridges(barbell) == [(2, 3)]


def _bridges_by_deletion(g) -> list[tuple[int, int]]:
    edges = g.edge_list()
    bridges = []
    for u, v in edges:
        rest = build_graph([e for e in edges if e != (u, v)], g.num_nodes)
        if bfs_distance(rest, u)[v] == UNREACHABLE:
            bridges.append((u, v))
    return bridges


@pytest.mark.parametrize(
    ('n', 'p', 'seed'), [(12, 0.15, 0), (30, 0.08, 1), (45, 0.05, 2), (60, 0.04, 3)]
)
def test_find_bridges_matches_deletion_oracle(n: int, p: float, seed: int) -> None:
    g = erdos_renyi(n, p, seed)

    assert sorted(find_bridges(g)) == _bridges_by_deletion(g)


@pytest.mark.parametrize('seed', range(3))
def test_bfs_distance_triangle_inequality(seed: int) -> None:
    g = erdos_renyi(25, 0.12, seed)
    dist = np.stack([bfs_distance(g, v) for v in range(g.num_nodes)])

    for a in range(g.num_nodes):
        for b in range(g.num_nodes):
            if dist[a, b] == UNREACHABLE:
                continue
            for c in range(g.num_nodes):
                if dist[b, c] != UNREACHABLE:
                    assert dist[a, c] != UNREACHABLE
                    assert dist[a, c] <= dist[a, b] + dist[b, c]


def test_toy_graph_has_no_bridges(toy_graph) -> None:
    assert find_bridges(toy_graph) == []


def test_induced_and_edge_subgraphs(toy_graph) -> None:
    local, nodes = induced_subgraph(toy_graph, [6, 3, 5])
    assert nodes.tolist() == [3, 5, 6]
    assert local.edge_list() == [(0, 1), (0, 2), (1, 2)]

    ids = [toy_graph.edge_id(5, 10), toy_graph.edge_id(10, 11)]
    local, nodes = edge_subgraph(toy_graph, ids)
    assert nodes.tolist() == [5, 10, 11]
    assert local.edge_list() == [(0, 1), (1, 2)]


def test_erdos_renyi_is_seeded_and_nested() -> None:
    sparse = erdos_renyi(40, 0.1, seed=4)
    dense = erdos_renyi(40, 0.3, seed=4)

    assert sparse.same_structure(erdos_renyi(40, 0.1, seed=4))
    assert not sparse.same_structure(erdos_renyi(40, 0.1, seed=5))
    assert set(sparse.edge_list()) <= set(dense.edge_list())
    assert erdos_renyi(10, 0.0, seed=0).num_edges == 0
    assert erdos_renyi(6, 1.0, seed=0).num_edges == 15


def test_erdos_renyi_rejects_bad_probability() -> None:
    with pytest.raises(GraphError):
        erdos_renyi(5, 1.5, seed=0)


def test_stochastic_block_model_labels_blocks() -> None:
    g, labels = stochastic_block_model([5, 7], 1.0, 0.0, seed=1)

    assert labels.labels.tolist() == [0] * 5 + [1] * 7
    assert g.num_edges == 10 + 21
    assert connected_components(g).max() == 1


def test_node_labels_and_features_validation(toy_graph) -> None:
    labels = NodeLabels.from_sequence([0, 2, 1])
    assert labels.num_classes == 3
    with pytest.raises(GraphError):
        NodeLabels.from_sequence([0, -1])
    with pytest.raises(GraphError):
        NodeLabels.from_sequence([0, 3], num_classes=2)
    with pytest.raises(GraphError):
        labels.check_for(toy_graph)
    with pytest.raises(GraphError):
        NodeFeatures(matrix=np.array([[0.0, np.nan]]))
    with pytest.raises(GraphError):
        NodeFeatures(matrix=np.ones((3, 2))).check_for(toy_graph)
