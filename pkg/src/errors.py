"""Custom exception hierarchy for cacose-lab failures."""

from __future__ import annotations

from pathlib import Path


class CacoseError(Exception):
    """Base exception for cacose-lab failures."""


class GraphError(CacoseError):
    """Raised when a graph operation receives structurally invalid input."""


class NodeIndexError(GraphError):
    """Raised when a node index (or an edge endpoint) is out of range."""

    def __init__(self, item: int | tuple[int, int], num_nodes: int) -> None:
        self.item = item
        self.num_nodes = num_nodes
        super().__init__(f'index {item} out of range for graph with {num_nodes} nodes')


class NotAnEdgeError(GraphError):
    """Raised when an operation requires an edge and receives a non-adjacent pair."""

    def __init__(self, u: int, v: int) -> None:
        self.u = u
        self.v = v
        super().__init__(f'({u}, {v}) is not an edge')


class IsolatedNodeError(GraphError):
    """Raised when a random-walk measure is requested for a degree-zero node."""

    def __init__(self, node: int) -> None:
        self.node = node
        super().__init__(f'node {node} is isolated; walk measure undefined')


class EmptyGraphError(GraphError):
    """Raised when a task requires at least one edge (or node) and gets none."""

    def __init__(self, identifier: str) -> None:
        self.identifier = identifier
        super().__init__(f'graph {identifier!r} has no edges')


class DecompositionError(CacoseError):
    """Raised for invalid decomposition parameters or mismatched families."""


class TransportError(CacoseError):
    """Raised when a transport problem cannot be solved."""


class UnboundedTransportError(TransportError):
    """Raised when two measures live in different connected components."""

    def __init__(self, source: int, target: int) -> None:
        self.source = source
        self.target = target
        super().__init__(f'no path between {source} and {target}: transport cost unbounded')


class AutodiffError(CacoseError):
    """Base class for tensor kernel failures."""


class ShapeError(AutodiffError):
    """Raised when operand shapes are incompatible."""

    def __init__(self, op: str, *shapes: tuple[int, ...]) -> None:
        self.op = op
        self.shapes = shapes
        rendered = ', '.join(str(shape) for shape in shapes)
        super().__init__(f'{op}: incompatible shapes {rendered}')


class NonFiniteError(AutodiffError):
    """Raised when an op produces NaN or Inf."""

    def __init__(self, op: str) -> None:
        self.op = op
        super().__init__(f'{op}: non-finite value produced')


class DatasetError(CacoseError):
    """Base class for dataset loading failures."""


class DatasetFormatError(DatasetError):
    """Raised when a dataset file cannot be parsed."""

    def __init__(self, path: Path | str, line: int | None, message: str) -> None:
        self.path = str(path)
        self.line = line
        self.message = message
        location = f'{self.path}:{line}' if line is not None else self.path
        super().__init__(f'{location}: {message}')


class DatasetValidationError(DatasetError):
    """Raised when dataset members disagree dimensionally."""


class SplitError(CacoseError):
    """Raised when a split would leave a partition empty or fractions are invalid."""


class ConfigError(CacoseError, ValueError):
    """Raised when a configuration value is invalid."""
