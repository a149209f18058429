"""Command-line surface: one subcommand per study plus training, evaluation and serving."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import replace
from os import environ
from pathlib import Path
from typing import Any

from src import __version__
from src.analysis import (
    DEFAULT_EDGE_BUDGET,
    PathMode,
    bridge_analysis,
    pilot_study,
    scalability_study,
)
from src.config import RunConfig, ServerConfig, Task
from src.curvature import EdgeSelection, curvature_table, verify_no_common_neighbor_theorem
from src.datasets import load_dataset, make_split, read_edge_list, read_labels
from src.decomposition import SupportScope, decompose
from src.errors import CacoseError, ConfigError, DatasetValidationError
from src.graph import erdos_renyi
from src.model import load_checkpoint, save_checkpoint
from src.results import (
    ANP_COLUMNS,
    BRIDGE_COLUMNS,
    CURVATURE_COLUMNS,
    LEVEL_COLUMNS,
    METRICS_COLUMNS,
    RATIO_COLUMNS,
    SCALABILITY_COLUMNS,
    anp_rows,
    bridge_rows,
    curvature_rows,
    metrics_rows,
    ratio_rows,
    scalability_rows,
    write_csv,
    write_json,
)
from src.training import TrainReport, evaluate, run_seeds, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2

Handler = Callable[[argparse.Namespace], int]


def _csv_list(cast: Callable[[str], Any]) -> Callable[[str], list[Any]]:
    def parse(text: str) -> list[Any]:
        try:
            return [cast(item) for item in text.split(',') if item.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f'invalid list {text!r}: {exc}') from exc

    return parse


def _out_dir(args: argparse.Namespace) -> Path:
    if args.out is not None:
        return Path(args.out)
    root = environ.get('CACOSE_OUTPUT_ROOT') or 'runs'
    return Path(root) / args.command


def _cmd_decompose(args: argparse.Namespace) -> int:
    g = read_edge_list(args.input)
    result = decompose(g, args.delta, scope=args.scope, apply_caef=not args.no_caef)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    levels = []
    for sub in result.family:
        name = f'level_{sub.level}.txt'
        lines = [f'{u} {v}' for u, v in sub.global_edges()]
        (out / name).write_text('\n'.join(lines) + '\n', encoding='utf-8')
        levels.append((sub.level, sub.num_nodes, int(sub.edge_ids.size), name))
    write_csv(out / 'levels.csv', LEVEL_COLUMNS, levels)
    write_csv(
        out / 'edges.csv',
        ('u', 'v', 'coreness', 'score'),
        [
            (u, v, int(c), int(s))
            for (u, v), c, s in zip(
                g.edge_list(), result.coreness.score, result.scores.score, strict=True
            )
        ],
    )
    write_csv(out / 'cores.csv', ('node', 'core'), enumerate(result.cores.core.tolist()))
    write_json(
        out / 'manifest.json',
        {
            'input': str(args.input),
            'fingerprint': g.fingerprint(),
            'num_nodes': g.num_nodes,
            'num_edges': g.num_edges,
            'delta': args.delta,
            'scope': str(args.scope),
            'caef': not args.no_caef,
            'k_max': result.cores.k_max,
            'demoted': int(result.demoted.size),
            'levels': [
                {'level': level, 'nodes': nodes, 'edges': edges, 'file': name}
                for level, nodes, edges, name in levels
            ],
        },
    )
    print(f'{len(levels)} levels written to {out}')
    return EXIT_OK


def _cmd_curvature_check(args: argparse.Namespace) -> int:
    if args.input is not None:
        graphs = [(str(args.input), read_edge_list(args.input))]
    else:
        graphs = [
            (f'er-{args.n}-{args.p}-{seed}', erdos_renyi(args.n, args.p, seed))
            for seed in range(args.seed, args.seed + args.trials)
        ]
    out = _out_dir(args)
    rows = []
    checked = violations = 0
    for name, g in graphs:
        if args.edges is EdgeSelection.ALL:
            results = curvature_table(g, EdgeSelection.ALL)
        else:
            report = verify_no_common_neighbor_theorem(g)
            results = report.results
            violations += len(report.violations)
        checked += len(results)
        rows.extend((name, *row) for row in curvature_rows(results))
    write_csv(out / 'curvature.csv', ('graph', *CURVATURE_COLUMNS), rows)
    write_json(
        out / 'summary.json',
        {
            'graphs': len(graphs),
            'edges': checked,
            'violations': violations,
            'holds': not violations,
        },
    )
    print(f'{checked} edges checked, {violations} violations')
    return EXIT_CHECK_FAILED if violations else EXIT_OK


def _load_run_config(args: argparse.Namespace, task: Task) -> RunConfig:
    if getattr(args, 'config', None) is not None:
        run = RunConfig.from_file(args.config)
        base = Path(args.config).parent
        for key in ('edges', 'labels', 'features', 'graphs'):
            value = getattr(run, key)
            if value is not None and not Path(value).is_absolute():
                setattr(run, key, str(base / value))
        if run.task is not task:
            raise ConfigError(f'config is for task {run.task.value!r}, not {task.value!r}')
    else:
        run = RunConfig.from_env(task)
        run.output_dir = str(Path(run.output_dir) / args.command)
    for key in ('edges', 'labels', 'features', 'graphs'):
        value = getattr(args, key, None)
        if value is not None:
            setattr(run, key, str(value))
    overrides = {
        name: getattr(args, name)
        for name in ('seed', 'delta', 'pooling_ratio', 'heads', 'max_epochs', 'num_seeds')
        if getattr(args, name, None) is not None
    }
    if getattr(args, 'no_attention', False):
        overrides['use_attention'] = False
    if getattr(args, 'no_caef', False):
        overrides['apply_caef'] = False
    run.model = replace(run.model, **overrides)
    if getattr(args, 'out', None) is not None:
        run.output_dir = str(args.out)
    return run._validate()


def _with_seed(run: RunConfig, seed: int) -> RunConfig:
    return replace(run, model=replace(run.model, seed=seed))


def _write_train_outputs(out: Path, run: RunConfig, report: TrainReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / 'config.toml').write_text(run.to_toml(), encoding='utf-8')
    write_csv(out / 'metrics.csv', METRICS_COLUMNS, metrics_rows(report.epochs))
    write_json(out / 'report.json', report.to_dict())
    write_json(out / 'timing.json', {'elapsed_seconds': report.elapsed_seconds})
    if report.model is not None:
        save_checkpoint(report.model, out / 'model.npz', run.task)


def _cmd_train(task: Task) -> Handler:
    def handler(args: argparse.Namespace) -> int:
        run = _load_run_config(args, task)
        bundle = load_dataset(
            edges=run.edges, labels=run.labels, features=run.features, graphs=run.graphs
        )
        if bundle.task is not task:
            raise DatasetValidationError(f'{bundle.name} is not a {task.value} dataset')
        out = Path(run.output_dir)
        if run.model.num_seeds > 1 and args.all_seeds:
            summary = run_seeds(bundle, run.model)
            for report in summary.reports:
                seed_run = _with_seed(run, report.seed)
                _write_train_outputs(out / f'seed-{report.seed}', seed_run, report)
            write_json(out / 'summary.json', summary.to_dict())
            print(f'mean test accuracy {summary.mean:.4f} +/- {summary.std:.4f}')
            return EXIT_OK
        report = train(bundle, run.model)
        _write_train_outputs(out, run, report)
        print(f'seed {report.seed}: test accuracy {report.test_accuracy:.4f}')
        return EXIT_OK

    return handler


def _cmd_eval(args: argparse.Namespace) -> int:
    task = Task(args.task)
    run = _load_run_config(args, task)
    bundle = load_dataset(
        edges=run.edges, labels=run.labels, features=run.features, graphs=run.graphs
    )
    out = _out_dir(args)
    if args.checkpoint is None:
        summary = run_seeds(bundle, run.model)
        write_json(out / 'eval.json', summary.to_dict())
        print(f'mean test accuracy {summary.mean:.4f} +/- {summary.std:.4f}')
        return EXIT_OK
    model, checkpoint_task = load_checkpoint(args.checkpoint)
    if checkpoint_task is not bundle.task:
        raise DatasetValidationError(
            f'checkpoint is for {checkpoint_task.value}, dataset is {bundle.task.value}'
        )
    size = len(bundle.graphs) if bundle.task is Task.GRAPH else bundle.graph.num_nodes
    if args.split == 'all':
        indices = None
    else:
        split = make_split(size, model.config.split, model.config.seed)
        indices = getattr(split, args.split)
    score = evaluate(model, bundle, indices)
    write_json(
        out / 'eval.json',
        {'checkpoint': str(args.checkpoint), 'split': args.split, 'accuracy': score},
    )
    print(f'{args.split} accuracy {score:.4f}')
    return EXIT_OK


def _cmd_pilot_study(args: argparse.Namespace) -> int:
    g = read_edge_list(args.input)
    labels = read_labels(args.labels).check_for(g)
    run = _load_run_config(args, Task.NODE)
    report = pilot_study(
        g,
        labels,
        run.model,
        top_levels=args.top_levels,
        hops=args.hops,
        mode=args.mode,
        cumulative=args.cumulative,
        apply_caef=args.apply_caef,
        graph_id=Path(args.input).stem,
    )
    out = _out_dir(args)
    write_csv(out / 'anp.csv', ANP_COLUMNS, anp_rows(report.records))
    write_csv(out / 'ratios.csv', RATIO_COLUMNS, ratio_rows(report.ratios))
    write_json(
        out / 'summary.json',
        {
            'records': len(report.records),
            'levels': sorted({r.level for r in report.records if r.level is not None}),
            'warnings': report.warnings,
            'mode': str(args.mode),
            'cumulative': args.cumulative,
        },
    )
    print(f'{len(report.records)} ANP records written to {out}')
    return EXIT_OK


def _cmd_bridge_analysis(args: argparse.Namespace) -> int:
    g = read_edge_list(args.input)
    labels = read_labels(args.labels).check_for(g)
    family = decompose(g, args.delta, scope=args.scope).family
    records = bridge_analysis(g, labels, family)
    out = _out_dir(args)
    write_csv(out / 'bridges.csv', BRIDGE_COLUMNS, bridge_rows(records))
    write_json(
        out / 'summary.json',
        {
            'bridges': len({r.edge for r in records}),
            'records': len(records),
            'delta': args.delta,
            'num_classes': labels.num_classes,
        },
    )
    print(f'{len(records)} bridge records written to {out}')
    return EXIT_OK


def _cmd_scalability(args: argparse.Namespace) -> int:
    records = scalability_study(
        args.sizes, args.densities, args.seed, args.delta, edge_budget=args.edge_budget
    )
    out = _out_dir(args)
    write_csv(out / 'scalability.csv', SCALABILITY_COLUMNS, scalability_rows(records))
    write_json(
        out / 'timing.json',
        [{'n': r.n, 'p': r.p, 'elapsed_seconds': r.elapsed} for r in records],
    )
    print(f'{len(records)} scalability records written to {out}')
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    from src.server import create_server

    create_server(ServerConfig.from_env()).run()
    return EXIT_OK


def _add_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--out', type=Path, help='output directory (default: $CACOSE_OUTPUT_ROOT/<command>)'
    )


def _add_model_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, help='TOML run config')
    parser.add_argument('--seed', type=int, help='run seed')
    parser.add_argument('--delta', type=int, help='CaEF threshold')
    parser.add_argument('--pooling-ratio', type=float, help='SAGPool keep ratio')
    parser.add_argument('--heads', type=int, help='cross-attention heads')
    parser.add_argument('--max-epochs', type=int, help='epoch limit')
    parser.add_argument('--num-seeds', type=int, help='seeds for the multi-seed protocol')


def _add_ablations(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--no-attention', action='store_true', help='use pooled level embeddings directly'
    )
    parser.add_argument('--no-caef', action='store_true', help='skip the edge filtration')


def _add_data(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--edges', type=Path, help='edge list (node classification)')
    parser.add_argument('--labels', type=Path, help='node labels, one per line')
    parser.add_argument('--features', type=Path, help='feature rows, one per node')
    parser.add_argument('--graphs', type=Path, help='graph index: "<edge list> <label>" lines')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='cacose', description='Core-decomposed subgraph GNN lab: studies, training, eval.'
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument(
        '--log-level',
        default=environ.get('CACOSE_LOG_LEVEL', 'WARNING'),
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        type=str.upper,
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser(
        'decompose',
        help='k-core levels with CaEF',
        description=f'Writes manifest.json, edges.csv, cores.csv, levels.csv '
        f'({",".join(LEVEL_COLUMNS)}) and level_<k>.txt edge lists.',
    )
    p.add_argument('--input', type=Path, required=True)
    p.add_argument('--delta', type=int, default=3)
    p.add_argument('--scope', type=SupportScope, choices=list(SupportScope), default='core')
    p.add_argument('--no-caef', action='store_true', help='skip the edge filtration')
    _add_output(p)
    p.set_defaults(handler=_cmd_decompose)

    p = sub.add_parser(
        'curvature-check',
        help='Ollivier-Ricci sign check on zero-support edges',
        description=f'Writes curvature.csv (graph,{",".join(CURVATURE_COLUMNS)}) and '
        'summary.json; exits 1 when a zero-support edge has positive curvature.',
    )
    p.add_argument('--input', type=Path, help='edge list; omit to sample G(n, p) graphs')
    p.add_argument('--trials', type=int, default=100)
    p.add_argument('--n', type=int, default=30)
    p.add_argument('--p', type=float, default=0.15)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument(
        '--edges', type=EdgeSelection, choices=list(EdgeSelection), default='zero-support'
    )
    _add_output(p)
    p.set_defaults(handler=_cmd_curvature_check)

    p = sub.add_parser(
        'pilot-study',
        help='ANP of levels, pooled levels and homophilic counterparts',
        description=f'Writes anp.csv ({",".join(ANP_COLUMNS)}), ratios.csv '
        f'({",".join(RATIO_COLUMNS)}) and summary.json.',
    )
    p.add_argument('--input', type=Path, required=True)
    p.add_argument('--labels', type=Path, required=True)
    p.add_argument('--top-levels', type=int, default=3)
    p.add_argument('--hops', type=_csv_list(int), default=[4, 5])
    p.add_argument('--mode', type=PathMode, choices=list(PathMode), default='paths')
    p.add_argument('--cumulative', action='store_true', help='count lengths 1..n')
    p.add_argument('--apply-caef', action='store_true', help='use filtered scores for levels')
    _add_model_overrides(p)
    _add_output(p)
    p.set_defaults(handler=_cmd_pilot_study)

    p = sub.add_parser(
        'bridge-analysis',
        help='two-hop label histograms around bridges',
        description=f'Writes bridges.csv ({",".join(BRIDGE_COLUMNS)}; histograms are '
        '"|"-joined class counts) and summary.json.',
    )
    p.add_argument('--input', type=Path, required=True)
    p.add_argument('--labels', type=Path, required=True)
    p.add_argument('--delta', type=int, default=3)
    p.add_argument('--scope', type=SupportScope, choices=list(SupportScope), default='core')
    _add_output(p)
    p.set_defaults(handler=_cmd_bridge_analysis)

    p = sub.add_parser(
        'scalability',
        help='k_max of G(n, p) over a grid',
        description=f'Writes scalability.csv ({",".join(SCALABILITY_COLUMNS)}) and timing.json.',
    )
    p.add_argument('--sizes', type=_csv_list(int), required=True)
    p.add_argument('--densities', type=_csv_list(float), required=True)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--delta', type=int, help='also run the edge filtration')
    p.add_argument('--edge-budget', type=int, default=DEFAULT_EDGE_BUDGET)
    _add_output(p)
    p.set_defaults(handler=_cmd_scalability)

    for name, task in (('train-nc', Task.NODE), ('train-gc', Task.GRAPH)):
        p = sub.add_parser(
            name,
            help=f'train a {"node" if task is Task.NODE else "graph"} classifier',
            description=f'Writes config.toml, report.json, metrics.csv '
            f'({",".join(METRICS_COLUMNS)}), model.npz and timing.json.',
        )
        _add_model_overrides(p)
        _add_data(p)
        _add_ablations(p)
        p.add_argument(
            '--all-seeds', action='store_true', help='run num_seeds seeds, one subdirectory each'
        )
        _add_output(p)
        p.set_defaults(handler=_cmd_train(task))

    p = sub.add_parser(
        'eval',
        help='accuracy of a checkpoint, or the multi-seed protocol',
        description='Writes eval.json.',
    )
    p.add_argument('--task', choices=[t.value for t in Task], default=Task.NODE.value)
    p.add_argument('--checkpoint', type=Path)
    p.add_argument('--split', choices=['train', 'val', 'test', 'all'], default='test')
    _add_model_overrides(p)
    _add_data(p)
    _add_ablations(p)
    _add_output(p)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser('serve', help='run the MCP tool server over stdio')
    p.set_defaults(handler=_cmd_serve)
    return parser


def _error_line(exc: Exception) -> str:
    return f'error={type(exc).__name__} message={json.dumps(str(exc))}'


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        stream=sys.stderr,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    try:
        return args.handler(args)
    except CacoseError as exc:
        logger.debug('command failed', exc_info=True)
        print(_error_line(exc), file=sys.stderr)
        return EXIT_ERROR

