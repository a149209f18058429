"""Configuration handling for cacose-lab runs and the MCP tool server."""

from __future__ import annotations

import json
import math
import tomllib
from dataclasses import dataclass, replace
from enum import StrEnum
from os import environ
from pathlib import Path
from typing import Any, TypeVar

from src.decomposition import DEFAULT_DELTA, SupportScope
from src.errors import ConfigError
from src.layers import PoolActivation

DEFAULT_POOLING_RATIO = 0.5
DEFAULT_HIDDEN_DIM = 128
DEFAULT_SUBGRAPH_DIM = 128
DEFAULT_LEARNING_RATE = 2.5e-3
DEFAULT_WEIGHT_DECAY = 1e-4
DEFAULT_NUM_GCN_LAYERS = 2
DEFAULT_MAX_DEGREE_FEATURE = 64
DEFAULT_NUM_SEEDS = 10
DEFAULT_OUTPUT_ROOT = 'runs'
DEFAULT_CACHE_TTL_SECONDS = 600.0
DEFAULT_CACHE_MAXSIZE = 32
DEFAULT_MAX_NODES = 5000


class Task(StrEnum):
    NODE = 'nc'
    GRAPH = 'gc'


class FeatureKind(StrEnum):
    DEGREE = 'degree'
    IDENTITY = 'identity'


_TASK_DEFAULTS: dict[Task, dict[str, Any]] = {
    Task.NODE: {
        'heads': 2,
        'max_epochs': 250,
        'patience': 50,
        'split': (0.48, 0.32, 0.20),
    },
    Task.GRAPH: {
        'heads': 1,
        'max_epochs': 100,
        'patience': 25,
        'split': (0.8, 0.1, 0.1),
    },
}


@dataclass(slots=True)
class CacoseConfig:
    """Model and training hyperparameters.

    Defaults follow the node-classification setting; use :meth:`for_task` to get
    the graph-classification variants (one head, 100 epochs, patience 25,
    80/10/10 split). ``use_attention`` and ``apply_caef`` turn off cross-level
    attention and the edge filtration for ablation runs.

    Environment Variables (read by :meth:`from_env`):
        CACOSE_DELTA: CaEF threshold (default: 3)
        CACOSE_POOLING_RATIO: SAGPool keep ratio (default: 0.5)
        CACOSE_HEADS: Cross-attention heads (default: per task)
        CACOSE_HIDDEN_DIM: GCN output width (default: 128)
        CACOSE_LEARNING_RATE: Adam step size (default: 2.5e-3)
        CACOSE_WEIGHT_DECAY: Decoupled weight decay (default: 1e-4)
        CACOSE_SEED: Run seed (default: 0)

    Example:
        >>> config = CacoseConfig.for_task(Task.GRAPH, seed=7)
        >>> config.heads, config.max_epochs
        (1, 100)
    """

    delta: int = DEFAULT_DELTA
    pooling_ratio: float = DEFAULT_POOLING_RATIO
    heads: int = 2
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    subgraph_dim: int = DEFAULT_SUBGRAPH_DIM
    learning_rate: float = DEFAULT_LEARNING_RATE
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    max_epochs: int = 250
    patience: int = 50
    seed: int = 0
    split: tuple[float, float, float] = (0.48, 0.32, 0.20)
    num_gcn_layers: int = DEFAULT_NUM_GCN_LAYERS
    pool_activation: PoolActivation = PoolActivation.RELU
    support_scope: SupportScope = SupportScope.CORE
    feature_kind: FeatureKind = FeatureKind.DEGREE
    max_degree_feature: int = DEFAULT_MAX_DEGREE_FEATURE
    num_seeds: int = DEFAULT_NUM_SEEDS
    use_attention: bool = True
    apply_caef: bool = True

    @classmethod
    def for_task(cls, task: Task | str, **overrides: Any) -> CacoseConfig:
        values = dict(_TASK_DEFAULTS[Task(task)])
        values.update(overrides)
        return cls(**values)._validate()

    @classmethod
    def from_env(cls, task: Task | str = Task.NODE) -> CacoseConfig:
        """Task defaults overridden by ``CACOSE_*`` environment variables."""
        base = cls.for_task(task)
        return replace(
            base,
            delta=int(_read_number('CACOSE_DELTA', int, base.delta, minimum=1)),
            pooling_ratio=_read_number(
                'CACOSE_POOLING_RATIO', float, base.pooling_ratio, minimum=1e-6
            ),
            heads=int(_read_number('CACOSE_HEADS', int, base.heads, minimum=1)),
            hidden_dim=int(_read_number('CACOSE_HIDDEN_DIM', int, base.hidden_dim, minimum=1)),
            learning_rate=_read_number(
                'CACOSE_LEARNING_RATE', float, base.learning_rate, minimum=1e-12
            ),
            weight_decay=_read_number('CACOSE_WEIGHT_DECAY', float, base.weight_decay, minimum=0.0),
            seed=int(_read_number('CACOSE_SEED', int, base.seed, minimum=0)),
        )._validate()

    def _validate(self) -> CacoseConfig:
        """Check ranges and cross-field consistency; returns self for chaining."""
        try:
            self.pool_activation = PoolActivation(self.pool_activation)
            self.support_scope = SupportScope(self.support_scope)
            self.feature_kind = FeatureKind(self.feature_kind)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.split = tuple(float(f) for f in self.split)  # type: ignore[assignment]
        for name in ('use_attention', 'apply_caef'):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f'{name} must be true or false: {getattr(self, name)!r}')

        if self.delta < 1:
            raise ConfigError(f'delta must be at least 1: {self.delta}')
        if not 0.0 < self.pooling_ratio <= 1.0:
            raise ConfigError(f'pooling_ratio must lie in (0, 1]: {self.pooling_ratio}')
        for name in (
            'heads',
            'hidden_dim',
            'subgraph_dim',
            'max_epochs',
            'patience',
            'num_gcn_layers',
            'max_degree_feature',
            'num_seeds',
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be positive: {getattr(self, name)}')
        if self.subgraph_dim % self.heads:
            raise ConfigError(
                f'subgraph_dim ({self.subgraph_dim}) must be divisible by heads ({self.heads})'
            )
        if self.learning_rate <= 0 or not math.isfinite(self.learning_rate):
            raise ConfigError(f'learning_rate must be positive: {self.learning_rate}')
        if self.weight_decay < 0 or not math.isfinite(self.weight_decay):
            raise ConfigError(f'weight_decay must be non-negative: {self.weight_decay}')
        if self.seed < 0:
            raise ConfigError(f'seed must be non-negative: {self.seed}')
        if len(self.split) != 3 or any(f <= 0 for f in self.split):
            raise ConfigError(f'split must be three positive fractions: {self.split}')
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f'split fractions must sum to 1: {self.split}')
        return self


_SECTIONS: dict[str, tuple[str, ...]] = {
    'model': (
        'delta',
        'pooling_ratio',
        'heads',
        'hidden_dim',
        'subgraph_dim',
        'num_gcn_layers',
        'pool_activation',
        'support_scope',
        'feature_kind',
        'max_degree_feature',
        'use_attention',
        'apply_caef',
    ),
    'training': (
        'learning_rate',
        'weight_decay',
        'max_epochs',
        'patience',
        'split',
        'num_seeds',
    ),
}


@dataclass(slots=True)
class RunConfig:
    """A full run: task, hyperparameters, dataset paths and output directory.

    Serialized as TOML with ``[run]``, ``[data]``, ``[model]`` and
    ``[training]`` sections. ``CACOSE_OUTPUT_ROOT`` sets the default output root.
    """

    task: Task
    model: CacoseConfig
    edges: str | None = None
    labels: str | None = None
    features: str | None = None
    graphs: str | None = None
    output_dir: str = DEFAULT_OUTPUT_ROOT

    @classmethod
    def from_env(cls, task: Task | str) -> RunConfig:
        output_dir = environ.get('CACOSE_OUTPUT_ROOT') or DEFAULT_OUTPUT_ROOT
        return cls(task=Task(task), model=CacoseConfig.from_env(task), output_dir=output_dir)

    @classmethod
    def from_toml(cls, text: str) -> RunConfig:
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f'invalid config file: {exc}') from exc
        unknown = set(raw) - {'run', 'data', *_SECTIONS}
        if unknown:
            raise ConfigError(f'unknown config sections: {sorted(unknown)}')
        run = dict(raw.get('run', {}))
        if 'task' not in run:
            raise ConfigError('config is missing run.task')
        try:
            task = Task(run.pop('task'))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        overrides: dict[str, Any] = {}
        if 'seed' in run:
            overrides['seed'] = run.pop('seed')
        output_dir = run.pop('output_dir', environ.get('CACOSE_OUTPUT_ROOT') or DEFAULT_OUTPUT_ROOT)
        if run:
            raise ConfigError(f'unknown keys in [run]: {sorted(run)}')
        for section, keys in _SECTIONS.items():
            values = dict(raw.get(section, {}))
            extra = set(values) - set(keys)
            if extra:
                raise ConfigError(f'unknown keys in [{section}]: {sorted(extra)}')
            overrides.update(values)
        if 'split' in overrides:
            overrides['split'] = tuple(overrides['split'])
        data = dict(raw.get('data', {}))
        extra = set(data) - {'edges', 'labels', 'features', 'graphs'}
        if extra:
            raise ConfigError(f'unknown keys in [data]: {sorted(extra)}')
        try:
            model = CacoseConfig.for_task(task, **overrides)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(task=task, model=model, output_dir=output_dir, **data)._validate()

    @classmethod
    def from_file(cls, path: Path | str) -> RunConfig:
        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as exc:
            raise ConfigError(f'cannot read config {path}: {exc}') from exc
        return cls.from_toml(text)

    def to_toml(self) -> str:
        lines = ['[run]', f'task = {_toml_value(self.task.value)}']
        lines.append(f'seed = {self.model.seed}')
        lines.append(f'output_dir = {_toml_value(self.output_dir)}')
        lines.append('')
        lines.append('[data]')
        for key in ('edges', 'labels', 'features', 'graphs'):
            value = getattr(self, key)
            if value is not None:
                lines.append(f'{key} = {_toml_value(value)}')
        for section, keys in _SECTIONS.items():
            lines.append('')
            lines.append(f'[{section}]')
            for key in keys:
                lines.append(f'{key} = {_toml_value(getattr(self.model, key))}')
        return '\n'.join(lines) + '\n'

    def _validate(self) -> RunConfig:
        self.model._validate()
        if self.task is Task.NODE and self.graphs is not None:
            raise ConfigError('node classification takes data.edges, not data.graphs')
        if self.task is Task.GRAPH and self.edges is not None:
            raise ConfigError('graph classification takes data.graphs, not data.edges')
        return self


@dataclass(slots=True)
class ServerConfig:
    """Settings for the MCP tool server.

    Environment Variables:
        CACOSE_CACHE_TTL: Decomposition cache lifetime in seconds (default: 600.0)
        CACOSE_CACHE_MAXSIZE: Maximum cached decompositions (default: 32)
        CACOSE_MAX_NODES: Largest graph a tool call may submit (default: 5000)
    """

    cache_ttl: float = DEFAULT_CACHE_TTL_SECONDS
    cache_maxsize: int = DEFAULT_CACHE_MAXSIZE
    max_nodes: int = DEFAULT_MAX_NODES

    @classmethod
    def from_env(cls) -> ServerConfig:
        return cls(
            cache_ttl=_read_number('CACOSE_CACHE_TTL', float, DEFAULT_CACHE_TTL_SECONDS),
            cache_maxsize=int(
                _read_number('CACOSE_CACHE_MAXSIZE', int, DEFAULT_CACHE_MAXSIZE, minimum=1)
            ),
            max_nodes=int(_read_number('CACOSE_MAX_NODES', int, DEFAULT_MAX_NODES, minimum=1)),
        )._validate()

    def _validate(self) -> ServerConfig:
        if self.cache_ttl < 0:
            raise ConfigError(f'cache_ttl must be non-negative: {self.cache_ttl}')
        if self.cache_maxsize < 1:
            raise ConfigError(f'cache_maxsize must be at least 1: {self.cache_maxsize}')
        if self.max_nodes < 1:
            raise ConfigError(f'max_nodes must be at least 1: {self.max_nodes}')
        return self


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, StrEnum):
        return json.dumps(value.value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (tuple, list)):
        return '[' + ', '.join(_toml_value(item) for item in value) + ']'
    raise ConfigError(f'cannot serialize {value!r}')


T = TypeVar('T', bound=float | int)


def _read_number(
    name: str,
    cast: type[T],
    default: T,
    *,
    minimum: T | None = None,
) -> T:
    raw = environ.get(name)
    if not raw:
        return default
    try:
        value = cast(raw)
    except (TypeError, ValueError):
        return default
    if minimum is not None and value < minimum:
        return default
    return value
