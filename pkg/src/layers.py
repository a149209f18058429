"""GCN propagation, self-attention graph pooling, cross-subgraph attention and MLP heads."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import StrEnum
from weakref import WeakKeyDictionary

import numpy as np

from src import autodiff as ad
from src.autodiff import Parameter, Tensor
from src.decomposition import Subgraph
from src.errors import ConfigError, GraphError, ShapeError
from src.graph import Graph

_ADJACENCY_CACHE: WeakKeyDictionary[Subgraph, Tensor] = WeakKeyDictionary()


class PoolActivation(StrEnum):
    RELU = 'relu'
    TANH = 'tanh'


def normalize_adjacency(g: Graph) -> np.ndarray:
    """Dense ``D^-1/2 (A + I) D^-1/2`` of a (local) graph."""
    n = g.num_nodes
    a = np.eye(n)
    if g.num_edges:
        a[g.edges[:, 0], g.edges[:, 1]] = 1.0
        a[g.edges[:, 1], g.edges[:, 0]] = 1.0
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def adjacency_tensor(sub: Subgraph) -> Tensor:
    """Normalized adjacency of a level subgraph, computed once per subgraph."""
    cached = _ADJACENCY_CACHE.get(sub)
    if cached is None:
        cached = ad.constant(normalize_adjacency(sub.graph))
        _ADJACENCY_CACHE[sub] = cached
    return cached


def pooled_count(n: int, ratio: float) -> int:
    """``ceil(ratio * n)`` with float noise (``0.3 * 10``) rounded away first."""
    return max(1, math.ceil(round(ratio * n, 9)))


class GcnLayer:
    """One propagation step ``act(A_hat @ H @ W)``."""

    def __init__(self, weight: Parameter) -> None:
        self.weight = weight

    @classmethod
    def create(cls, name: str, d_in: int, d_out: int, rng: np.random.Generator) -> GcnLayer:
        return cls(Parameter(ad.glorot_uniform(d_in, d_out, rng), name=name))

    def propagate(self, adjacency: Tensor, h: Tensor) -> Tensor:
        if h.rows != adjacency.rows or h.cols != self.weight.rows:
            raise ShapeError('gcn', adjacency.shape, h.shape, self.weight.shape)
        return ad.matmul(adjacency, ad.matmul(h, self.weight))

    def __call__(self, adjacency: Tensor, h: Tensor) -> Tensor:
        return ad.relu(self.propagate(adjacency, h))

    def parameters(self) -> list[Parameter]:
        return [self.weight]


def gcn_forward(layer: GcnLayer, adjacency: Tensor, h: Tensor) -> Tensor:
    return layer(adjacency, h)


@dataclass(frozen=True)
class PoolResult:
    z: Tensor
    selected: np.ndarray
    scores: np.ndarray


class SagPool:
    """Score nodes with a one-column GCN, keep the top ``ceil(PR * N)``, mean-read them out."""

    def __init__(
        self,
        attention: GcnLayer,
        pooling_ratio: float,
        *,
        activation: PoolActivation = PoolActivation.RELU,
        projection: Parameter | None = None,
    ) -> None:
        if not 0.0 < pooling_ratio <= 1.0:
            raise ConfigError(f'pooling_ratio must lie in (0, 1]: {pooling_ratio}')
        self.attention = attention
        self.pooling_ratio = pooling_ratio
        self.activation = activation
        self.projection = projection

    @classmethod
    def create(
        cls,
        name: str,
        d_in: int,
        d_out: int,
        pooling_ratio: float,
        rng: np.random.Generator,
        *,
        activation: PoolActivation = PoolActivation.RELU,
    ) -> SagPool:
        attention = GcnLayer.create(f'{name}.attention', d_in, 1, rng)
        projection = None
        if d_out != d_in:
            projection = Parameter(ad.glorot_uniform(d_in, d_out, rng), name=f'{name}.projection')
        return cls(attention, pooling_ratio, activation=activation, projection=projection)

    def score(self, adjacency: Tensor, h: Tensor) -> Tensor:
        raw = self.attention.propagate(adjacency, h)
        return ad.relu(raw) if self.activation is PoolActivation.RELU else ad.tanh(raw)

    def __call__(self, adjacency: Tensor, h: Tensor) -> PoolResult:
        n = h.rows
        if n == 0:
            raise GraphError('cannot pool an empty subgraph')
        scores = self.score(adjacency, h)
        # descending score, ties to the lower node index
        order = np.lexsort((np.arange(n), -scores.data[:, 0]))
        selected = order[: pooled_count(n, self.pooling_ratio)]
        kept = ad.gather_rows(h, selected)
        weights = ad.matmul(ad.gather_rows(scores, selected), ad.constant(np.ones((1, h.cols))))
        z = ad.mean_rows(ad.hadamard(kept, weights))
        if self.projection is not None:
            z = ad.matmul(z, self.projection)
        return PoolResult(z=z, selected=selected, scores=scores.data[:, 0].copy())

    def parameters(self) -> list[Parameter]:
        params = self.attention.parameters()
        if self.projection is not None:
            params.append(self.projection)
        return params


def sagpool_forward(pool: SagPool, sub: Subgraph, h: Tensor) -> PoolResult:
    return pool(adjacency_tensor(sub), h)


@dataclass(frozen=True)
class AttentionResult:
    output: Tensor
    weights: tuple[np.ndarray, ...]


class CrossAttention:
    """Multi-head scaled dot-product attention over stacked subgraph embeddings.

    With one head there is no output projection and the result is exactly
    ``softmax(Q K^T / sqrt(d)) V``.
    """

    def __init__(
        self,
        wq: Parameter,
        wk: Parameter,
        wv: Parameter,
        heads: int,
        wo: Parameter | None = None,
    ) -> None:
        dim = wq.rows
        if heads < 1 or dim % heads:
            raise ConfigError(f'subgraph dim {dim} not divisible by {heads} heads')
        self.wq, self.wk, self.wv, self.wo = wq, wk, wv, wo
        self.heads = heads

    @classmethod
    def create(cls, name: str, dim: int, heads: int, rng: np.random.Generator) -> CrossAttention:
        if heads < 1 or dim % heads:
            raise ConfigError(f'subgraph dim {dim} not divisible by {heads} heads')
        wq, wk, wv = (
            Parameter(ad.glorot_uniform(dim, dim, rng), name=f'{name}.{part}')
            for part in ('wq', 'wk', 'wv')
        )
        wo = Parameter(ad.glorot_uniform(dim, dim, rng), name=f'{name}.wo') if heads > 1 else None
        return cls(wq, wk, wv, heads, wo)

    @property
    def dim(self) -> int:
        return self.wq.rows

    def __call__(self, z: Tensor) -> AttentionResult:
        if z.rows < 1 or z.cols != self.dim:
            raise ShapeError('cross_attention', z.shape, self.wq.shape)
        q, k, v = ad.matmul(z, self.wq), ad.matmul(z, self.wk), ad.matmul(z, self.wv)
        head_dim = self.dim // self.heads
        outputs = []
        weights = []
        for head in range(self.heads):
            if self.heads == 1:
                qh, kh, vh = q, k, v
            else:
                lo, hi = head * head_dim, (head + 1) * head_dim
                qh, kh, vh = (ad.slice_cols(t, lo, hi) for t in (q, k, v))
            logits = ad.scale(ad.matmul(qh, ad.transpose(kh)), 1.0 / math.sqrt(head_dim))
            attn = ad.softmax_rows(logits)
            weights.append(attn.data.copy())
            outputs.append(ad.matmul(attn, vh))
        out = outputs[0]
        for part in outputs[1:]:
            out = ad.concat_cols(out, part)
        if self.wo is not None:
            out = ad.matmul(out, self.wo)
        return AttentionResult(output=out, weights=tuple(weights))

    def parameters(self) -> list[Parameter]:
        params = [self.wq, self.wk, self.wv]
        if self.wo is not None:
            params.append(self.wo)
        return params


def cross_attention_forward(att: CrossAttention, z_s: Tensor) -> Tensor:
    return att(z_s).output


class MlpHead:
    """``relu(x W1 + b1) W2 + b2``."""

    def __init__(self, w1: Parameter, b1: Parameter, w2: Parameter, b2: Parameter) -> None:
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2

    @classmethod
    def create(
        cls, name: str, d_in: int, hidden: int, num_classes: int, rng: np.random.Generator
    ) -> MlpHead:
        return cls(
            Parameter(ad.glorot_uniform(d_in, hidden, rng), name=f'{name}.w1'),
            Parameter(np.zeros((1, hidden)), name=f'{name}.b1'),
            Parameter(ad.glorot_uniform(hidden, num_classes, rng), name=f'{name}.w2'),
            Parameter(np.zeros((1, num_classes)), name=f'{name}.b2'),
        )

    @property
    def in_dim(self) -> int:
        return self.w1.rows

    def __call__(self, x: Tensor) -> Tensor:
        if x.cols != self.in_dim:
            raise ShapeError('mlp_head', x.shape, self.w1.shape)
        hidden = ad.relu(ad.add(ad.matmul(x, self.w1), self.b1))
        return ad.add(ad.matmul(hidden, self.w2), self.b2)

    def parameters(self) -> list[Parameter]:
        return [self.w1, self.b1, self.w2, self.b2]
