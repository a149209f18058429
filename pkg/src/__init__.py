"""cacose-lab: core-decomposed subgraph GNNs, their studies and an MCP tool server."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

try:  # pragma: no cover - fallback only triggers when metadata missing
    __version__: str = version('cacose-lab')
except PackageNotFoundError:  # pragma: no cover
    __version__ = '0.1.0'

from .config import CacoseConfig, RunConfig, ServerConfig, Task  # noqa: E402
from .decomposition import decompose  # noqa: E402
from .graph import Graph, build_graph  # noqa: E402
from .model import CacoseModel  # noqa: E402
from .server import create_server  # noqa: E402
from .training import run_seeds, train  # noqa: E402

__all__ = [
    'CacoseConfig',
    'CacoseModel',
    'Graph',
    'RunConfig',
    'ServerConfig',
    'Task',
    '__version__',
    'build_graph',
    'create_server',
    'decompose',
    'run_seeds',
    'train',
]
