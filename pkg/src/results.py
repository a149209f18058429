"""Deterministic CSV/JSON writers for run outputs."""

from __future__ import annotations

import csv
import json
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from src.analysis import AnpRecord, BridgeRecord, RatioRecord, ScalabilityRecord
from src.curvature import CurvatureResult
from src.training import EpochRecord

ANP_COLUMNS = ('graph_id', 'variant', 'level', 'hop', 'anp', 'num_nodes', 'num_edges')
RATIO_COLUMNS = ('graph_id', 'level', 'hop', 'unpooled_ratio', 'pooled_ratio')
BRIDGE_COLUMNS = (
    'u',
    'v',
    'context',
    'u_histogram',
    'v_histogram',
    'histogram',
    'u_size',
    'v_size',
    'size',
    'homophily',
)
SCALABILITY_COLUMNS = (
    'n',
    'p',
    'seed',
    'edges',
    'k_max',
    'max_degree',
    'levels',
    'demoted',
    'skipped',
)
CURVATURE_COLUMNS = ('u', 'v', 'support', 'w1', 'kappa')
METRICS_COLUMNS = ('epoch', 'train_loss', 'train_accuracy', 'val_loss', 'val_accuracy')
LEVEL_COLUMNS = ('level', 'nodes', 'edges', 'file')


def format_value(value: Any) -> str:
    """Render one cell; floats use ``repr`` so they round-trip exactly."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return '|'.join(format_value(v) for v in value)
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def anp_rows(records: Iterable[AnpRecord]) -> list[tuple[Any, ...]]:
    return [
        (r.graph_id, r.variant, r.level, r.hop, r.anp, r.num_nodes, r.num_edges) for r in records
    ]


def ratio_rows(records: Iterable[RatioRecord]) -> list[tuple[Any, ...]]:
    return [(r.graph_id, r.level, r.hop, r.unpooled_ratio, r.pooled_ratio) for r in records]


def bridge_rows(records: Iterable[BridgeRecord]) -> list[tuple[Any, ...]]:
    return [
        (
            r.edge[0],
            r.edge[1],
            r.context,
            r.u_histogram,
            r.v_histogram,
            r.histogram,
            r.u_size,
            r.v_size,
            r.size,
            r.homophily,
        )
        for r in records
    ]


def scalability_rows(records: Iterable[ScalabilityRecord]) -> list[tuple[Any, ...]]:
    return [
        (r.n, r.p, r.seed, r.edges, r.k_max, r.max_degree, r.levels, r.demoted, r.skipped)
        for r in records
    ]


def curvature_rows(results: Iterable[CurvatureResult]) -> list[tuple[Any, ...]]:
    return [(r.edge[0], r.edge[1], r.support, r.w1, r.kappa) for r in results]


def metrics_rows(epochs: Iterable[EpochRecord]) -> list[tuple[Any, ...]]:
    return [
        (e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy) for e in epochs
    ]
