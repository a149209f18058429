from pathlib import Path

import numpy as np
import pytest

from src.config import CacoseConfig, ServerConfig, Task
from src.graph import Graph, NodeFeatures, NodeLabels, build_graph
from src.server import create_server

# K5 on 0..4, K4 on 6..9, node 5 bridging them, and a pendant triangle 5-10-11.
TOY_EDGES = [
    *[(u, v) for u in range(5) for v in range(u + 1, 5)],
    *[(u, v) for u in range(6, 10) for v in range(u + 1, 10)],
    (3, 6),
    (3, 5),
    (5, 6),
    (5, 10),
    (5, 11),
    (10, 11),
]


@pytest.fixture
def toy_graph() -> Graph:
    return build_graph(TOY_EDGES, 12)


@pytest.fixture
def toy_labels() -> NodeLabels:
    return NodeLabels.from_sequence([0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1])


@pytest.fixture
def toy_features(toy_graph: Graph) -> NodeFeatures:
    rng = np.random.default_rng(3)
    return NodeFeatures(matrix=rng.normal(size=(toy_graph.num_nodes, 5)))


@pytest.fixture
def small_config() -> CacoseConfig:
    """Narrow model so forward passes and gradient checks stay fast."""
    return CacoseConfig.for_task(
        Task.NODE,
        hidden_dim=8,
        subgraph_dim=8,
        heads=2,
        max_epochs=5,
        patience=5,
    )


@pytest.fixture
def write_text(tmp_path: Path):
    def write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
        return path

    return write


@pytest.fixture
def server_config() -> ServerConfig:
    return ServerConfig(cache_ttl=600.0, cache_maxsize=8, max_nodes=200)


@pytest.fixture
def cacose_server(server_config: ServerConfig):
    return create_server(config=server_config)
