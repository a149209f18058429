"""Text dataset formats, bundles, synthetic tasks and seeded splits."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.config import FeatureKind, Task
from src.errors import DatasetError, DatasetFormatError, DatasetValidationError, SplitError
from src.graph import Graph, NodeFeatures, NodeLabels, build_graph, stochastic_block_model
from src.seeding import Stream, make_rng

logger = logging.getLogger(__name__)

NODES_HEADER = '# nodes'
CLASSES_HEADER = '# classes'


def _lines(path: Path) -> Iterator[tuple[int, str]]:
    """Non-blank lines of ``path`` with 1-based line numbers."""
    try:
        text = path.read_text(encoding='utf-8')
    except FileNotFoundError as exc:
        raise DatasetFormatError(path, None, 'file not found') from exc
    except OSError as exc:
        raise DatasetFormatError(path, None, str(exc)) from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            yield lineno, line


def _header_value(path: Path, lineno: int, line: str, header: str) -> int | None:
    if not line.startswith(header):
        return None
    try:
        value = int(line[len(header) :].strip())
    except ValueError as exc:
        raise DatasetFormatError(path, lineno, f'bad header {line!r}') from exc
    if value < 0:
        raise DatasetFormatError(path, lineno, f'negative count in {line!r}')
    return value


def read_edge_list(path: Path | str, num_nodes: int | None = None) -> Graph:
    """Read ``u v`` pairs; ``#`` lines are comments, ``# nodes N`` fixes the node count.

    Without a node count the graph spans ``max index + 1`` nodes. Reversed and
    repeated pairs collapse and self-loops are dropped.
    """
    path = Path(path)
    pairs: list[tuple[int, int]] = []
    declared = None
    for lineno, line in _lines(path):
        if line.startswith('#'):
            value = _header_value(path, lineno, line, NODES_HEADER)
            if value is not None:
                declared = value
            continue
        parts = line.split()
        if len(parts) < 2:
            raise DatasetFormatError(path, lineno, f'expected "u v", got {line!r}')
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise DatasetFormatError(path, lineno, f'non-integer node id in {line!r}') from exc
        if u < 0 or v < 0:
            raise DatasetFormatError(path, lineno, f'negative node id in {line!r}')
        if declared is not None and max(u, v) >= declared:
            raise DatasetFormatError(
                path, lineno, f'node id {max(u, v)} out of range for {declared} nodes'
            )
        pairs.append((u, v))
    inferred = max((max(p) for p in pairs), default=-1) + 1
    if num_nodes is None:
        num_nodes = declared if declared is not None else inferred
    elif (declared is not None and declared != num_nodes) or inferred > num_nodes:
        found = declared if declared is not None else inferred
        raise DatasetValidationError(
            f'{path}: {num_nodes} labelled rows for a graph with at least {found} nodes'
        )
    return build_graph(pairs, num_nodes)


def write_edge_list(g: Graph, path: Path | str) -> Path:
    path = Path(path)
    lines = [f'{NODES_HEADER} {g.num_nodes}']
    lines.extend(f'{u} {v}' for u, v in g.edge_list())
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


def read_labels(path: Path | str) -> NodeLabels:
    """One non-negative integer per line; an optional ``# classes C`` header bounds them."""
    path = Path(path)
    values: list[int] = []
    classes = None
    for lineno, line in _lines(path):
        if line.startswith('#'):
            value = _header_value(path, lineno, line, CLASSES_HEADER)
            if value is not None:
                classes = value
            continue
        try:
            label = int(line)
        except ValueError as exc:
            raise DatasetFormatError(path, lineno, f'non-integer label {line!r}') from exc
        if label < 0 or (classes is not None and label >= classes):
            bound = f'[0, {classes})' if classes is not None else 'non-negative range'
            raise DatasetFormatError(path, lineno, f'label {label} out of {bound}')
        values.append(label)
    return NodeLabels.from_sequence(values, classes)


def write_labels(labels: NodeLabels, path: Path | str) -> Path:
    path = Path(path)
    lines = [f'{CLASSES_HEADER} {labels.num_classes}']
    lines.extend(str(int(y)) for y in labels.labels)
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


def read_features(path: Path | str) -> NodeFeatures:
    path = Path(path)
    rows: list[list[float]] = []
    width = None
    for lineno, line in _lines(path):
        if line.startswith('#'):
            continue
        try:
            row = [float(tok) for tok in line.split()]
        except ValueError as exc:
            raise DatasetFormatError(path, lineno, f'non-numeric feature in {line!r}') from exc
        if not all(math.isfinite(value) for value in row):
            raise DatasetFormatError(path, lineno, 'non-finite feature value')
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DatasetFormatError(
                path, lineno, f'ragged row: {len(row)} values, expected {width}'
            )
        rows.append(row)
    if width is None:
        raise DatasetFormatError(path, None, 'no feature rows')
    return NodeFeatures(matrix=np.asarray(rows, dtype=np.float64))


def write_features(x: NodeFeatures, path: Path | str) -> Path:
    path = Path(path)
    lines = [' '.join(repr(float(value)) for value in row) for row in x.matrix]
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


def synthesize_features(
    g: Graph, kind: FeatureKind = FeatureKind.DEGREE, max_degree: int = 64
) -> NodeFeatures:
    """Degree one-hot (degrees above ``max_degree`` share the last column) or identity."""
    if FeatureKind(kind) is FeatureKind.IDENTITY:
        return NodeFeatures(matrix=np.eye(g.num_nodes))
    matrix = np.zeros((g.num_nodes, max_degree + 1))
    matrix[np.arange(g.num_nodes), np.minimum(g.degrees(), max_degree)] = 1.0
    return NodeFeatures(matrix=matrix)


@dataclass(frozen=True)
class DatasetBundle:
    """One node-classification graph, or a labelled collection of graphs."""

    name: str
    graphs: tuple[Graph, ...]
    features: tuple[NodeFeatures, ...] | None = None
    node_labels: NodeLabels | None = None
    graph_labels: tuple[int, ...] | None = None
    graph_names: tuple[str, ...] = ()
    sources: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not self.graphs:
            raise DatasetValidationError(f'{self.name}: dataset has no graphs')
        if self.node_labels is not None and self.graph_labels is not None:
            raise DatasetValidationError(f'{self.name}: both node and graph labels given')
        if self.features is not None:
            if len(self.features) != len(self.graphs):
                raise DatasetValidationError(
                    f'{self.name}: {len(self.features)} feature sets for {len(self.graphs)} graphs'
                )
            for g, x in zip(self.graphs, self.features, strict=True):
                if x.matrix.shape[0] != g.num_nodes:
                    raise DatasetValidationError(
                        f'{self.name}: {x.matrix.shape[0]} feature rows for {g.num_nodes} nodes'
                    )
        if self.node_labels is not None:
            if len(self.graphs) != 1:
                raise DatasetValidationError(f'{self.name}: node labels need exactly one graph')
            if len(self.node_labels) != self.graphs[0].num_nodes:
                raise DatasetValidationError(
                    f'{self.name}: {len(self.node_labels)} labels for '
                    f'{self.graphs[0].num_nodes} nodes'
                )
        if self.graph_labels is not None and len(self.graph_labels) != len(self.graphs):
            raise DatasetValidationError(
                f'{self.name}: {len(self.graph_labels)} labels for {len(self.graphs)} graphs'
            )
        if self.graph_names and len(self.graph_names) != len(self.graphs):
            raise DatasetValidationError(f'{self.name}: graph names do not match graphs')

    @property
    def task(self) -> Task:
        return Task.GRAPH if self.graph_labels is not None else Task.NODE

    @property
    def graph(self) -> Graph:
        return self.graphs[0]

    @property
    def num_classes(self) -> int:
        if self.node_labels is not None:
            return self.node_labels.num_classes
        if self.graph_labels is not None:
            return max(self.graph_labels) + 1
        raise DatasetError(f'{self.name}: dataset has no labels')

    def graph_name(self, i: int) -> str:
        return self.graph_names[i] if self.graph_names else f'{self.name}[{i}]'

    def features_for(
        self, i: int, kind: FeatureKind = FeatureKind.DEGREE, max_degree: int = 64
    ) -> NodeFeatures:
        if self.features is not None:
            return self.features[i]
        return synthesize_features(self.graphs[i], kind, max_degree)


def load_dataset(
    *,
    edges: Path | str | None = None,
    labels: Path | str | None = None,
    features: Path | str | None = None,
    graphs: Path | str | None = None,
    name: str | None = None,
) -> DatasetBundle:
    """Load a node dataset (``edges`` plus optional labels/features) or a graph index."""
    if (edges is None) == (graphs is None):
        raise DatasetError('give exactly one of an edge list or a graph index')
    if graphs is not None:
        return load_graph_index(graphs, name=name)

    edges = Path(edges)
    label_map = read_labels(labels) if labels is not None else None
    x = read_features(features) if features is not None else None
    counts = [len(label_map)] if label_map is not None else []
    if x is not None:
        counts.append(int(x.matrix.shape[0]))
    if len(set(counts)) > 1:
        raise DatasetValidationError(
            f'{counts[0]} labels but {counts[1]} feature rows'
        )
    g = read_edge_list(edges, counts[0] if counts else None)
    sources = tuple(str(p) for p in (edges, labels, features) if p is not None)
    bundle = DatasetBundle(
        name=name or edges.stem,
        graphs=(g,),
        features=(x,) if x is not None else None,
        node_labels=label_map,
        sources=sources,
    )
    logger.info('loaded %s: %d nodes, %d edges', bundle.name, g.num_nodes, g.num_edges)
    return bundle


def load_graph_index(path: Path | str, *, name: str | None = None) -> DatasetBundle:
    """Read ``<edge-list path> <label>`` lines; paths are relative to the index file."""
    path = Path(path)
    graphs, labels, names = [], [], []
    for lineno, line in _lines(path):
        if line.startswith('#'):
            continue
        parts = line.rsplit(maxsplit=1)
        if len(parts) != 2:
            raise DatasetFormatError(path, lineno, f'expected "<path> <label>", got {line!r}')
        try:
            label = int(parts[1])
        except ValueError as exc:
            raise DatasetFormatError(path, lineno, f'non-integer label {parts[1]!r}') from exc
        if label < 0:
            raise DatasetFormatError(path, lineno, f'label {label} out of non-negative range')
        target = path.parent / parts[0]
        if not target.exists():
            raise DatasetFormatError(path, lineno, f'missing graph file {parts[0]}')
        graphs.append(read_edge_list(target))
        labels.append(label)
        names.append(parts[0])
    if not graphs:
        raise DatasetFormatError(path, None, 'index lists no graphs')
    return DatasetBundle(
        name=name or path.stem,
        graphs=tuple(graphs),
        graph_labels=tuple(labels),
        graph_names=tuple(names),
        sources=(str(path),),
    )


def save_dataset(bundle: DatasetBundle, directory: Path | str) -> dict[str, Path]:
    """Write a bundle in the text formats :func:`load_dataset` reads back."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if bundle.task is Task.GRAPH:
        lines = []
        for i, g in enumerate(bundle.graphs):
            filename = f'graph_{i:04d}.txt'
            write_edge_list(g, directory / filename)
            lines.append(f'{filename} {bundle.graph_labels[i]}')  # type: ignore[index]
        index = directory / 'index.txt'
        index.write_text('\n'.join(lines) + '\n', encoding='utf-8')
        return {'graphs': index}
    written = {'edges': write_edge_list(bundle.graph, directory / 'edges.txt')}
    if bundle.node_labels is not None:
        written['labels'] = write_labels(bundle.node_labels, directory / 'labels.txt')
    if bundle.features is not None:
        written['features'] = write_features(bundle.features[0], directory / 'features.txt')
    return written


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint, exhaustive train/val/test index sets over ``num_items``."""

    num_items: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    def labels(self) -> list[str]:
        out = [''] * self.num_items
        for name in ('train', 'val', 'test'):
            for i in getattr(self, name).tolist():
                out[i] = name
        return out


def make_split(n_items: int, fractions: Sequence[float], seed: int) -> SplitAssignment:
    """Seeded shuffle, then contiguous train/val/test slices.

    Train and val sizes are ``fraction * n`` rounded half up; test takes the rest.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise SplitError(f'expected three non-negative fractions, got {tuple(fractions)}')
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f'fractions must sum to 1: {tuple(fractions)}')
    n_train = math.floor(fractions[0] * n_items + 0.5)
    n_val = math.floor(fractions[1] * n_items + 0.5)
    n_test = n_items - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise SplitError(
            f'{n_items} items give an empty partition: '
            f'train={n_train} val={n_val} test={n_test}'
        )
    order = make_rng(seed, Stream.SPLIT).permutation(n_items)
    return SplitAssignment(
        num_items=n_items,
        train=np.sort(order[:n_train]),
        val=np.sort(order[n_train : n_train + n_val]),
        test=np.sort(order[n_train + n_val :]),
        seed=seed,
    )


def complete_graph(n: int) -> Graph:
    return build_graph([(u, v) for u in range(n) for v in range(u + 1, n)], n)


def clique_dataset(per_class: int = 20, sizes: tuple[int, int] = (3, 6)) -> DatasetBundle:
    """Two classes of complete graphs, separable by their maximum core."""
    graphs = []
    labels = []
    for label, size in enumerate(sizes):
        for _ in range(per_class):
            graphs.append(complete_graph(size))
            labels.append(label)
    return DatasetBundle(
        name=f'cliques-{sizes[0]}-vs-{sizes[1]}',
        graphs=tuple(graphs),
        graph_labels=tuple(labels),
    )


def sbm_dataset(
    sizes: Sequence[int] = (30, 30), p_in: float = 0.5, p_out: float = 0.02, seed: int = 0
) -> DatasetBundle:
    g, labels = stochastic_block_model(sizes, p_in, p_out, seed)
    return DatasetBundle(name='sbm', graphs=(g,), node_labels=labels)
