import numpy as np
import pytest

from src.config import FeatureKind, Task
from src.datasets import (
    DatasetBundle,
    clique_dataset,
    load_dataset,
    make_split,
    read_edge_list,
    read_features,
    read_labels,
    save_dataset,
    sbm_dataset,
    synthesize_features,
)
from src.errors import DatasetError, DatasetFormatError, DatasetValidationError, SplitError
from src.graph import NodeFeatures, build_graph


class TestReaders:
    def test_edge_list_with_comments_and_header(self, write_text) -> None:
        path = write_text('g.txt', '# nodes 5\n# a comment\n0 1\n\n1 2 0.5\n2 1\n3 3\n')

        g = read_edge_list(path)

        assert g.num_nodes == 5
        assert g.edge_list() == [(0, 1), (1, 2)]

    def test_edge_list_infers_node_count(self, write_text) -> None:
        g = read_edge_list(write_text('g.txt', '0 4\n'))

        assert g.num_nodes == 5

    @pytest.mark.parametrize(
        ('text', 'line'),
        [
            ('0 1\n1\n', 2),
            ('0 1\nx 2\n', 2),
            ('0 -1\n', 1),
            ('# nodes 2\n0 1\n1 2\n', 3),
            ('# nodes two\n', 1),
        ],
    )
    def test_edge_list_errors_carry_line_numbers(self, write_text, text: str, line: int) -> None:
        path = write_text('bad.txt', text)

        with pytest.raises(DatasetFormatError) as info:
            read_edge_list(path)

        assert info.value.line == line
        assert info.value.path == str(path)
        assert f'{path}:{line}' in str(info.value)

    def test_missing_file(self, tmp_path) -> None:
        with pytest.raises(DatasetFormatError, match='file not found'):
            read_edge_list(tmp_path / 'absent.txt')

    def test_edge_list_larger_than_label_count(self, write_text) -> None:
        path = write_text('g.txt', '0 1\n1 5\n')

        with pytest.raises(DatasetValidationError):
            read_edge_list(path, num_nodes=4)

    def test_labels(self, write_text) -> None:
        labels = read_labels(write_text('y.txt', '# classes 4\n0\n3\n1\n'))

        assert labels.labels.tolist() == [0, 3, 1]
        assert labels.num_classes == 4

    @pytest.mark.parametrize('text', ['0\n1.5\n', '# classes 2\n0\n2\n', '-1\n'])
    def test_bad_labels(self, write_text, text: str) -> None:
        with pytest.raises(DatasetFormatError) as info:
            read_labels(write_text('y.txt', text))

        assert info.value.line is not None

    def test_features(self, write_text) -> None:
        x = read_features(write_text('x.txt', '1 2.5\n-0.5 1e-3\n'))

        assert x.matrix.tolist() == [[1.0, 2.5], [-0.5, 1e-3]]

    @pytest.mark.parametrize(
        ('text', 'line'), [('1 2\n3\n', 2), ('1 nan\n', 1), ('1 a\n', 1), ('1 inf\n', 1)]
    )
    def test_bad_features(self, write_text, text: str, line: int) -> None:
        with pytest.raises(DatasetFormatError) as info:
            read_features(write_text('x.txt', text))

        assert info.value.line == line


class TestBundles:
    def test_node_dataset_round_trip(self, tmp_path) -> None:
        bundle = sbm_dataset((6, 6), 0.8, 0.1, seed=2)
        x = synthesize_features(bundle.graph, FeatureKind.DEGREE, 8)
        bundle = DatasetBundle(
            name='sbm', graphs=bundle.graphs, features=(x,), node_labels=bundle.node_labels
        )

        paths = save_dataset(bundle, tmp_path / 'data')
        loaded = load_dataset(**{k: str(v) for k, v in paths.items()}, name='sbm')

        assert loaded.task is Task.NODE
        assert loaded.graph.same_structure(bundle.graph)
        assert np.array_equal(loaded.node_labels.labels, bundle.node_labels.labels)
        assert np.array_equal(loaded.features[0].matrix, x.matrix)

    def test_isolated_trailing_nodes_survive_round_trip(self, tmp_path) -> None:
        g = build_graph([(0, 1)], 4)
        bundle = DatasetBundle(name='tiny', graphs=(g,))

        paths = save_dataset(bundle, tmp_path)

        assert read_edge_list(paths['edges']).num_nodes == 4

    def test_graph_index_round_trip(self, tmp_path) -> None:
        bundle = clique_dataset(per_class=3)

        paths = save_dataset(bundle, tmp_path / 'cliques')
        loaded = load_dataset(graphs=paths['graphs'])

        assert loaded.task is Task.GRAPH
        assert loaded.graph_labels == bundle.graph_labels
        assert loaded.num_classes == 2
        assert loaded.graph_name(0) == 'graph_0000.txt'
        assert all(a.same_structure(b) for a, b in zip(loaded.graphs, bundle.graphs, strict=True))

    def test_graph_index_errors(self, write_text) -> None:
        write_text('g0.txt', '0 1\n')
        index = write_text('index.txt', 'g0.txt 0\ng1.txt 1\n')

        with pytest.raises(DatasetFormatError) as info:
            load_dataset(graphs=index)

        assert info.value.line == 2

    def test_label_and_feature_counts_must_agree(self, write_text) -> None:
        edges = write_text('e.txt', '0 1\n1 2\n')
        labels = write_text('y.txt', '0\n1\n0\n')
        features = write_text('x.txt', '1\n2\n')

        with pytest.raises(DatasetValidationError):
            load_dataset(edges=edges, labels=labels, features=features)

    def test_labels_extend_node_count(self, write_text) -> None:
        edges = write_text('e.txt', '0 1\n')
        labels = write_text('y.txt', '0\n1\n1\n')

        bundle = load_dataset(edges=edges, labels=labels)

        assert bundle.graph.num_nodes == 3

    def test_exactly_one_source(self, write_text) -> None:
        with pytest.raises(DatasetError):
            load_dataset()
        edges = write_text('e.txt', '0 1\n')
        with pytest.raises(DatasetError):
            load_dataset(edges=edges, graphs=edges)

    def test_bundle_validation(self) -> None:
        g = build_graph([(0, 1)], 2)
        with pytest.raises(DatasetValidationError):
            DatasetBundle(name='x', graphs=())
        with pytest.raises(DatasetValidationError):
            DatasetBundle(name='x', graphs=(g,), features=(NodeFeatures(np.ones((3, 1))),))
        with pytest.raises(DatasetValidationError):
            DatasetBundle(name='x', graphs=(g, g), graph_labels=(0,))

    def test_synthesized_features(self, toy_graph) -> None:
        degree = synthesize_features(toy_graph, FeatureKind.DEGREE, max_degree=4)
        identity = synthesize_features(toy_graph, FeatureKind.IDENTITY)

        assert degree.dim == 5
        assert degree.matrix.sum(axis=1).tolist() == [1.0] * 12
        # node 3 has degree 6, which shares the last column
        assert degree.matrix[3, 4] == 1.0
        assert degree.matrix[10, 2] == 1.0
        assert np.array_equal(identity.matrix, np.eye(12))

    def test_clique_dataset(self) -> None:
        bundle = clique_dataset(per_class=4, sizes=(3, 5))

        assert len(bundle.graphs) == 8
        assert bundle.graph_labels == (0,) * 4 + (1,) * 4
        assert bundle.graphs[-1].num_edges == 10


class TestSplits:
    def test_node_split_sizes(self) -> None:
        split = make_split(100, (0.48, 0.32, 0.20), seed=0)

        assert (split.train.size, split.val.size, split.test.size) == (48, 32, 20)

    def test_graph_split_sizes(self) -> None:
        split = make_split(10, (0.8, 0.1, 0.1), seed=0)

        assert (split.train.size, split.val.size, split.test.size) == (8, 1, 1)

    def test_rounding_half_up(self) -> None:
        split = make_split(25, (0.5, 0.3, 0.2), seed=1)

        assert (split.train.size, split.val.size, split.test.size) == (13, 8, 4)

    def test_split_is_a_seeded_partition(self) -> None:
        a = make_split(50, (0.6, 0.2, 0.2), seed=3)
        b = make_split(50, (0.6, 0.2, 0.2), seed=3)
        c = make_split(50, (0.6, 0.2, 0.2), seed=4)

        merged = np.sort(np.concatenate([a.train, a.val, a.test]))
        assert merged.tolist() == list(range(50))
        assert np.array_equal(a.train, b.train)
        assert not np.array_equal(a.train, c.train)
        assert a.labels().count('val') == 10

    @pytest.mark.parametrize(
        ('n', 'fractions'),
        [(3, (0.8, 0.1, 0.1)), (10, (0.5, 0.5, 0.0)), (10, (0.5, 0.3, 0.3)), (10, (0.5, 0.5))],
    )
    def test_invalid_splits(self, n: int, fractions: tuple[float, ...]) -> None:
        with pytest.raises(SplitError):
            make_split(n, fractions, seed=0)
