"""Full-batch node classification, per-graph graph classification and evaluation."""

from __future__ import annotations

import logging
import statistics
import time
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from src import autodiff as ad
from src.autodiff import Adam, Parameter, Tensor
from src.config import CacoseConfig, Task
from src.datasets import DatasetBundle, SplitAssignment, make_split
from src.decomposition import SubgraphFamily, decompose
from src.errors import DatasetValidationError, EmptyGraphError, NonFiniteError
from src.graph import Graph, NodeFeatures, NodeLabels
from src.model import CacoseModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainReport:
    """Per-epoch metrics and the test accuracy at the best validation epoch.

    ``elapsed_seconds`` and ``model`` are left out of :meth:`to_dict`, so two
    runs with the same seed serialize identically.
    """

    task: Task
    seed: int
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0
    test_accuracy: float = 0.0
    stopped_early: bool = False
    elapsed_seconds: float = field(default=0.0, compare=False)
    model: CacoseModel | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            'task': self.task.value,
            'seed': self.seed,
            'best_epoch': self.best_epoch,
            'best_val_accuracy': self.best_val_accuracy,
            'test_accuracy': self.test_accuracy,
            'stopped_early': self.stopped_early,
            'num_epochs': len(self.epochs),
        }


@dataclass(frozen=True)
class SeedSummary:
    reports: tuple[TrainReport, ...]

    @property
    def accuracies(self) -> list[float]:
        return [r.test_accuracy for r in self.reports]

    @property
    def mean(self) -> float:
        return statistics.fmean(self.accuracies)

    @property
    def std(self) -> float:
        return statistics.pstdev(self.accuracies) if len(self.reports) > 1 else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            'seeds': [r.seed for r in self.reports],
            'test_accuracies': self.accuracies,
            'mean_test_accuracy': self.mean,
            'std_test_accuracy': self.std,
        }


def accuracy(logits: Tensor | np.ndarray, targets: Sequence[int] | np.ndarray) -> float:
    """Fraction of rows whose argmax equals the target; lower class wins ties."""
    scores = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.size == 0:
        return 0.0
    return float(np.mean(scores.argmax(axis=1) == targets))


def _touched(tape: ad.Tape) -> list[Parameter]:
    return [node for node in tape.nodes if isinstance(node, Parameter)]


def _levels(g: Graph, config: CacoseConfig, delta: int | None = None) -> SubgraphFamily:
    delta = config.delta if delta is None else delta
    return decompose(g, delta, scope=config.support_scope, apply_caef=config.apply_caef).family


def _checked_loss(loss: Tensor, epoch: int) -> float:
    value = loss.item()
    if not np.isfinite(value):
        raise NonFiniteError(f'loss at epoch {epoch}')
    return value


class _EarlyStopping:
    """Strict improvement on validation accuracy resets the patience counter."""

    def __init__(self, patience: int) -> None:
        self.patience = patience
        self.best = -1.0
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, val_accuracy: float) -> bool:
        if val_accuracy > self.best:
            self.best = val_accuracy
            self.best_epoch = epoch
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def exhausted(self) -> bool:
        return self.stale >= self.patience


def train_node_classifier(
    g: Graph,
    x: NodeFeatures,
    labels: NodeLabels,
    config: CacoseConfig,
    *,
    family: SubgraphFamily | None = None,
    split: SplitAssignment | None = None,
) -> TrainReport:
    """Full-batch training on one graph with early stopping on validation accuracy.

    Metrics for an epoch are read from the forward pass that precedes its
    optimizer step, so the kept checkpoint is the one those metrics describe.
    """
    labels.check_for(g)
    x.check_for(g)
    split = split or make_split(g.num_nodes, config.split, config.seed)
    if family is None:
        family = _levels(g, config)
    y = labels.labels
    model = CacoseModel(config, in_dim=x.dim, num_classes=labels.num_classes)
    model.ensure_levels(family.level_values)
    optimizer = Adam(config.learning_rate, config.weight_decay)
    params = model.parameters()
    stopper = _EarlyStopping(config.patience)
    report = TrainReport(task=Task.NODE, seed=config.seed)
    best_state = model.state_dict()
    started = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        optimizer.zero_grad(params)
        logits = model.predict_nodes(model.forward(g, x, family).z_nodes)
        loss = ad.cross_entropy(ad.gather_rows(logits, split.train), y[split.train])
        val_loss = ad.cross_entropy(ad.gather_rows(logits, split.val), y[split.val])
        record = EpochRecord(
            epoch=epoch,
            train_loss=_checked_loss(loss, epoch),
            train_accuracy=accuracy(logits.data[split.train], y[split.train]),
            val_loss=_checked_loss(val_loss, epoch),
            val_accuracy=accuracy(logits.data[split.val], y[split.val]),
        )
        report.epochs.append(record)
        if stopper.update(epoch, record.val_accuracy):
            best_state = model.state_dict()
            report.test_accuracy = accuracy(logits.data[split.test], y[split.test])
        if stopper.exhausted:
            report.stopped_early = True
            logger.info('early stop at epoch %d (best %d)', epoch, stopper.best_epoch)
            break
        tape = ad.backward(loss)
        optimizer.step(_touched(tape))

    model.load_state_dict(best_state)
    report.best_epoch = stopper.best_epoch
    report.best_val_accuracy = stopper.best
    report.elapsed_seconds = time.perf_counter() - started
    report.model = model
    return report


@dataclass(frozen=True)
class _GraphItem:
    name: str
    graph: Graph
    features: NodeFeatures
    family: SubgraphFamily
    label: int


def _prepare_graphs(
    graphs: Sequence[Graph],
    labels: Sequence[int],
    config: CacoseConfig,
    features: Sequence[NodeFeatures] | None,
    names: Sequence[str] | None,
) -> list[_GraphItem]:
    if len(graphs) != len(labels):
        raise DatasetValidationError(f'{len(labels)} labels for {len(graphs)} graphs')
    if features is not None and len(features) != len(graphs):
        raise DatasetValidationError(f'{len(features)} feature sets for {len(graphs)} graphs')
    sparse = {c: n for c, n in sorted(Counter(labels).items()) if n < 3}
    if sparse:
        raise DatasetValidationError(f'classes with fewer than 3 graphs: {sparse}')
    bundle = DatasetBundle(
        name='graphs',
        graphs=tuple(graphs),
        features=tuple(features) if features is not None else None,
        graph_labels=tuple(labels),
        graph_names=tuple(names) if names is not None else (),
    )
    items = []
    for i, g in enumerate(graphs):
        name = bundle.graph_name(i)
        if g.num_edges == 0:
            raise EmptyGraphError(name)
        x = bundle.features_for(i, config.feature_kind, config.max_degree_feature)
        family = _levels(g, config)
        items.append(_GraphItem(name, g, x, family, int(labels[i])))
    dims = {item.features.dim for item in items}
    if len(dims) != 1:
        raise DatasetValidationError(f'graphs have differing feature widths: {sorted(dims)}')
    return items


def _graph_logits(model: CacoseModel, item: _GraphItem) -> Tensor:
    result = model.forward(item.graph, item.features, item.family)
    return model.predict_graph(result.z_graph, item.name)


def _graph_metrics(model: CacoseModel, items: Sequence[_GraphItem]) -> tuple[float, float]:
    losses, correct = [], 0
    for item in items:
        logits = _graph_logits(model, item)
        losses.append(ad.cross_entropy(logits, [item.label]).item())
        correct += int(logits.data.argmax(axis=1)[0] == item.label)
    return statistics.fmean(losses), correct / len(items)


def train_graph_classifier(
    graphs: Sequence[Graph],
    labels: Sequence[int],
    config: CacoseConfig,
    *,
    features: Sequence[NodeFeatures] | None = None,
    names: Sequence[str] | None = None,
    split: SplitAssignment | None = None,
) -> TrainReport:
    """One optimizer step per training graph per epoch, early stopping on validation.

    Level encoders are shared across graphs by coreness level.
    """
    items = _prepare_graphs(graphs, labels, config, features, names)
    split = split or make_split(len(items), config.split, config.seed)
    train = [items[i] for i in split.train]
    val = [items[i] for i in split.val]
    test = [items[i] for i in split.test]
    num_classes = max(labels) + 1
    model = CacoseModel(config, in_dim=items[0].features.dim, num_classes=num_classes)
    model.ensure_levels(level for item in items for level in item.family.level_values)
    optimizer = Adam(config.learning_rate, config.weight_decay)
    params = model.parameters()
    stopper = _EarlyStopping(config.patience)
    report = TrainReport(task=Task.GRAPH, seed=config.seed)
    best_state = model.state_dict()
    started = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        losses, correct = [], 0
        for item in train:
            optimizer.zero_grad(params)
            logits = _graph_logits(model, item)
            loss = ad.cross_entropy(logits, [item.label])
            losses.append(_checked_loss(loss, epoch))
            correct += int(logits.data.argmax(axis=1)[0] == item.label)
            tape = ad.backward(loss)
            optimizer.step(_touched(tape))
        val_loss, val_accuracy = _graph_metrics(model, val)
        record = EpochRecord(
            epoch=epoch,
            train_loss=statistics.fmean(losses),
            train_accuracy=correct / len(train),
            val_loss=val_loss,
            val_accuracy=val_accuracy,
        )
        report.epochs.append(record)
        if stopper.update(epoch, val_accuracy):
            best_state = model.state_dict()
            report.test_accuracy = _graph_metrics(model, test)[1]
        if stopper.exhausted:
            report.stopped_early = True
            logger.info('early stop at epoch %d (best %d)', epoch, stopper.best_epoch)
            break

    model.load_state_dict(best_state)
    report.best_epoch = stopper.best_epoch
    report.best_val_accuracy = stopper.best
    report.elapsed_seconds = time.perf_counter() - started
    report.model = model
    return report


def train(bundle: DatasetBundle, config: CacoseConfig) -> TrainReport:
    if bundle.task is Task.GRAPH:
        return train_graph_classifier(
            bundle.graphs,
            bundle.graph_labels,  # type: ignore[arg-type]
            config,
            features=bundle.features,
            names=bundle.graph_names or None,
        )
    if bundle.node_labels is None:
        raise DatasetValidationError(f'{bundle.name}: node classification needs labels')
    x = bundle.features_for(0, config.feature_kind, config.max_degree_feature)
    return train_node_classifier(bundle.graph, x, bundle.node_labels, config)


def evaluate(
    model: CacoseModel,
    bundle: DatasetBundle,
    indices: Sequence[int] | np.ndarray | None = None,
    *,
    delta: int | None = None,
) -> float:
    """Accuracy of ``model`` on the nodes (or graphs) at ``indices``; all when omitted."""
    config = model.config
    if bundle.task is Task.GRAPH:
        chosen = range(len(bundle.graphs)) if indices is None else np.asarray(indices).tolist()
        targets = bundle.graph_labels or ()
        correct = 0
        total = 0
        for i in chosen:
            g = bundle.graphs[i]
            x = bundle.features_for(i, config.feature_kind, config.max_degree_feature)
            family = _levels(g, config, delta)
            result = model.forward(g, x, family)
            logits = model.predict_graph(result.z_graph, bundle.graph_name(i))
            correct += int(logits.data.argmax(axis=1)[0] == targets[i])
            total += 1
        return correct / total if total else 0.0
    if bundle.node_labels is None:
        raise DatasetValidationError(f'{bundle.name}: evaluation needs labels')
    g = bundle.graph
    x = bundle.features_for(0, config.feature_kind, config.max_degree_feature)
    family = _levels(g, config, delta)
    logits = model.predict_nodes(model.forward(g, x, family).z_nodes)
    idx = np.arange(g.num_nodes) if indices is None else np.asarray(indices, dtype=np.int64)
    return accuracy(logits.data[idx], bundle.node_labels.labels[idx])


def run_seeds(
    bundle: DatasetBundle, config: CacoseConfig, seeds: Sequence[int] | None = None
) -> SeedSummary:
    """Repeat training with a fresh split and fresh parameters per seed."""
    if seeds is None:
        seeds = [config.seed + i for i in range(config.num_seeds)]
    reports = []
    for seed in seeds:
        report = train(bundle, replace(config, seed=seed))
        logger.info('seed %d: test accuracy %.4f', seed, report.test_accuracy)
        reports.append(report)
    return SeedSummary(reports=tuple(reports))
