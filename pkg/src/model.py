"""The CaCoSE pipeline: per-level encoders, cross-level attention, merge and heads."""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Iterable
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from src import autodiff as ad
from src.autodiff import Parameter, Tensor
from src.config import CacoseConfig, Task
from src.decomposition import SubgraphFamily
from src.errors import AutodiffError, ConfigError, EmptyGraphError, ShapeError
from src.graph import Graph, NodeFeatures
from src.layers import CrossAttention, GcnLayer, MlpHead, PoolResult, SagPool, adjacency_tensor
from src.seeding import Stream, make_rng

logger = logging.getLogger(__name__)

_LEVEL_NAME = re.compile(r'^level(\d+)\.')
_META_KEY = '__meta__'


class LevelEncoder:
    """GCN stack and SAGPool for one coreness level ``k``."""

    def __init__(self, level: int, gcn: list[GcnLayer], pool: SagPool) -> None:
        self.level = level
        self.gcn = gcn
        self.pool = pool

    @classmethod
    def create(cls, level: int, in_dim: int, config: CacoseConfig) -> LevelEncoder:
        rng = make_rng(config.seed, Stream.INIT, level + 1)
        prefix = f'level{level}'
        gcn = []
        d_in = in_dim
        for i in range(config.num_gcn_layers):
            gcn.append(GcnLayer.create(f'{prefix}.gcn{i}', d_in, config.hidden_dim, rng))
            d_in = config.hidden_dim
        pool = SagPool.create(
            f'{prefix}.pool',
            config.hidden_dim,
            config.subgraph_dim,
            config.pooling_ratio,
            rng,
            activation=config.pool_activation,
        )
        return cls(level, gcn, pool)

    def encode(self, adjacency: Tensor, h: Tensor) -> tuple[Tensor, PoolResult]:
        for layer in self.gcn:
            h = layer(adjacency, h)
        return h, self.pool(adjacency, h)

    def parameters(self) -> list[Parameter]:
        params = [p for layer in self.gcn for p in layer.parameters()]
        return params + self.pool.parameters()


@dataclass(frozen=True)
class ForwardResult:
    """Outputs of one forward pass.

    ``z_graph`` is ``None`` when the family has no levels (edgeless graph).
    """

    z_nodes: Tensor
    z_graph: Tensor | None
    levels: tuple[int, ...]
    level_embeddings: tuple[Tensor, ...]
    attended: Tensor | None
    pools: tuple[PoolResult, ...]
    attention_weights: tuple[np.ndarray, ...]


class CacoseModel:
    """Lazily grown per-level encoders plus shared attention and heads.

    Example:
        >>> model = CacoseModel(CacoseConfig(), in_dim=8, num_classes=3)
        >>> result = model.forward(g, x, decompose(g).family)
        >>> logits = model.predict_nodes(result.z_nodes)
    """

    def __init__(self, config: CacoseConfig, in_dim: int, num_classes: int) -> None:
        if in_dim < 1 or num_classes < 1:
            raise ConfigError(f'in_dim and num_classes must be positive: {in_dim}, {num_classes}')
        self.config = config
        self.in_dim = in_dim
        self.num_classes = num_classes
        rng = make_rng(config.seed, Stream.INIT)
        self.attention = (
            CrossAttention.create('attention', config.subgraph_dim, config.heads, rng)
            if config.use_attention
            else None
        )
        self.node_head = MlpHead.create(
            'node_head', self.node_dim, config.hidden_dim, num_classes, rng
        )
        self.graph_head = MlpHead.create(
            'graph_head', config.subgraph_dim, config.hidden_dim, num_classes, rng
        )
        self.encoders: dict[int, LevelEncoder] = {}

    @property
    def node_dim(self) -> int:
        return self.config.hidden_dim + self.config.subgraph_dim

    def encoder(self, level: int) -> LevelEncoder:
        enc = self.encoders.get(level)
        if enc is None:
            enc = LevelEncoder.create(level, self.in_dim, self.config)
            self.encoders[level] = enc
            logger.debug('created encoder for level %d', level)
        return enc

    def ensure_levels(self, levels: Iterable[int]) -> None:
        for level in sorted(set(levels)):
            self.encoder(level)

    def parameters(self) -> list[Parameter]:
        params = self.attention.parameters() if self.attention is not None else []
        params += self.node_head.parameters() + self.graph_head.parameters()
        for level in sorted(self.encoders):
            params += self.encoders[level].parameters()
        return params

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def forward(self, g: Graph, x: NodeFeatures, family: SubgraphFamily) -> ForwardResult:
        family.check_for(g)
        x.check_for(g)
        if x.dim != self.in_dim:
            raise ShapeError('forward', x.matrix.shape, (g.num_nodes, self.in_dim))
        n = g.num_nodes
        if not len(family):
            zeros = ad.constant(np.zeros((n, self.node_dim)))
            return ForwardResult(zeros, None, (), (), None, (), ())

        features = ad.constant(x.matrix)
        embeddings = []
        pools = []
        for sub in family:
            adjacency = adjacency_tensor(sub)
            h, pooled = self.encoder(sub.level).encode(
                adjacency, ad.gather_rows(features, sub.nodes)
            )
            embeddings.append(h)
            pools.append(pooled)

        stacked = ad.concat_rows([p.z for p in pools])
        weights: tuple[np.ndarray, ...] = ()
        if self.attention is None:
            attended = stacked
        else:
            attention = self.attention(stacked)
            attended, weights = attention.output, attention.weights
        z_graph = ad.mean_rows(attended)

        z_nodes = None
        for i, (sub, h) in enumerate(zip(family, embeddings, strict=True)):
            context = ad.gather_rows(attended, np.full(sub.num_nodes, i))
            part = ad.scatter_rows(ad.concat_cols(h, context), sub.nodes, n)
            z_nodes = part if z_nodes is None else ad.add(z_nodes, part)

        return ForwardResult(
            z_nodes=z_nodes,
            z_graph=z_graph,
            levels=tuple(family.level_values),
            level_embeddings=tuple(embeddings),
            attended=attended,
            pools=tuple(pools),
            attention_weights=weights,
        )

    def predict_nodes(self, z_nodes: Tensor) -> Tensor:
        return self.node_head(z_nodes)

    def predict_graph(self, z_graph: Tensor | None, identifier: str = 'graph') -> Tensor:
        if z_graph is None:
            raise EmptyGraphError(identifier)
        return self.graph_head(z_graph)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        levels = {int(m.group(1)) for name in state if (m := _LEVEL_NAME.match(name))}
        self.ensure_levels(levels)
        params = self.named_parameters()
        unknown = sorted(set(state) - set(params))
        if unknown:
            raise AutodiffError(f'unknown parameters in state: {unknown}')
        for name, value in state.items():
            param = params[name]
            if value.shape != param.shape:
                raise ShapeError(f'load {name}', value.shape, param.shape)
            param.data[...] = value


def forward(
    model: CacoseModel, g: Graph, x: NodeFeatures, family: SubgraphFamily
) -> tuple[Tensor, Tensor | None]:
    result = model.forward(g, x, family)
    return result.z_nodes, result.z_graph


def save_checkpoint(model: CacoseModel, path: Path | str, task: Task) -> Path:
    """Write parameters plus the settings needed to rebuild the model to ``.npz``."""
    path = Path(path)
    meta = {
        'task': task.value,
        'in_dim': model.in_dim,
        'num_classes': model.num_classes,
        'config': asdict(model.config),
    }
    arrays = model.state_dict()
    arrays[_META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('wb') as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path: Path | str) -> tuple[CacoseModel, Task]:
    try:
        archive = np.load(Path(path), allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise ConfigError(f'cannot read checkpoint {path}: {exc}') from exc
    with archive:
        if _META_KEY not in archive.files:
            raise ConfigError(f'{path} is not a cacose checkpoint')
        meta = json.loads(str(archive[_META_KEY]))
        state = {name: archive[name] for name in archive.files if name != _META_KEY}
    config = CacoseConfig(**meta['config'])._validate()
    model = CacoseModel(config, in_dim=meta['in_dim'], num_classes=meta['num_classes'])
    model.load_state_dict(state)
    return model, Task(meta['task'])
