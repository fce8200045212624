#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import argparse
import difflib
import logging
import sys

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import pandas as pd

from pydantic import ValidationError

from subgraph_ddi import __version__
from subgraph_ddi.bench import BenchConfig, run_bench
from subgraph_ddi.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from subgraph_ddi.config import ABLATIONS, SWEEP_AXES, RunConfig, apply_overrides, load_config, sweep_override
from subgraph_ddi.errors import (
    CheckpointError,
    ConfigError,
    EntityNotFoundError,
    SubgraphDDIException,
    TaskModeError,
)
from subgraph_ddi.explain import export_dot, export_json, merge_antiparallel, summarize_pathway
from subgraph_ddi.graph import (
    DDISplits,
    KnowledgeGraph,
    build_propagation_graph,
    detect_task_mode,
    export_id_maps,
    load_ddi,
    load_kg,
    pair_subgraph,
    split_dataset,
)
from subgraph_ddi.metrics import AP_MODES, DEFAULT_BIN_EDGES, MetricsReport, evaluate, relation_bin_analysis
from subgraph_ddi.model import FingerprintTable, ModelConfig, compute_attention, count_kept_edges, run_model
from subgraph_ddi.synth import SynthSpec, gen_synth
from subgraph_ddi.train import (
    FitResult,
    PredictionRecord,
    fit,
    history_frame,
    known_triplets,
    predict,
    sigmoid,
    softmax,
)
from subgraph_ddi.types import TaskMode
from subgraph_ddi.utils import setup_logging, write_csv

log = logging.getLogger(__name__)

CHECKPOINT_NAME = 'model.ckpt'
SPLITS = ('train', 'dev', 'test')


@dataclass
class PreparedData:
    kg: KnowledgeGraph
    splits: DDISplits
    graph: KnowledgeGraph
    fingerprints: FingerprintTable | None


@dataclass
class TrainOutcome:
    result: FitResult
    data: PreparedData
    checkpoint: Path
    history: Path


def prepare_data(run: RunConfig) -> PreparedData:
    """Load the KG and pairs, split them and build the propagation graph from the train split."""
    run.check_inputs()
    model = run.effective_model()
    kg = load_kg(run.data.kg_file)
    ddi = load_ddi(run.data.ddi_file, run.train.task_mode, kg)
    splits = split_dataset(ddi, run.data.split_ratios, run.data.stratified, run.data.seed)
    log.info('Split %d pairs into %d/%d/%d', len(ddi), len(splits.train), len(splits.dev), len(splits.test))
    graph = build_propagation_graph(kg, splits.train, (splits.dev, splits.test), use_kg=model.use_kg)
    fingerprints = None
    if model.use_fingerprint and run.data.fingerprint_file is not None:
        fingerprints = FingerprintTable.from_file(
            run.data.fingerprint_file, graph.entity_index(), model.fingerprint_bits
        )
    return PreparedData(kg, splits, graph, fingerprints)


def run_training(run: RunConfig) -> TrainOutcome:
    """
    Train on ``run`` and write the checkpoint, the history CSV and the id maps to ``run.data.out_dir``.

    :param run: Full run configuration.
    :return:
    """
    data = prepare_data(run)
    out_dir = run.data.out_dir
    result = fit(data.graph, data.splits, run.effective_model(), run.train, data.fingerprints)
    history = write_csv(history_frame(result.history), out_dir / 'history.csv')
    export_id_maps(data.graph, out_dir)
    checkpoint = save_checkpoint(
        Checkpoint(
            run=run,
            model=result.model_config,
            params=result.params,
            entity_names=data.graph.entity_names,
            relation_names=data.graph.relation_names,
            ddi_offset=data.graph.ddi_offset,
            best_epoch=result.best_epoch,
            best_val_loss=result.best_val_loss,
            adam=result.adam,
        ),
        out_dir / CHECKPOINT_NAME,
    )
    log.info('Best epoch %d (val_loss %.6f)', result.best_epoch, result.best_val_loss)
    return TrainOutcome(result, data, checkpoint, history)


def _checked_data(checkpoint: Checkpoint, run: RunConfig | None = None) -> PreparedData:
    data = prepare_data(run or checkpoint.run)
    if data.graph.entity_names != checkpoint.entity_names or data.graph.relation_names != checkpoint.relation_names:
        raise CheckpointError('Checkpoint id maps do not match the re-loaded data')
    return data


def _check_task_mode(checkpoint: Checkpoint, data_mode: TaskMode | None) -> None:
    trained_mode = checkpoint.run.train.task_mode
    if data_mode is not None and data_mode is not trained_mode:
        raise TaskModeError(f'task mode mismatch: checkpoint is {trained_mode.value}, data is {data_mode.value}')


def evaluate_checkpoint(
    checkpoint: Checkpoint,
    split: str = 'test',
    out_dir: Path | None = None,
    ap_mode: str = 'precision',
    bin_edges: Sequence[float] = DEFAULT_BIN_EDGES,
    data: PreparedData | None = None,
    threads: int = 1,
) -> MetricsReport:
    """
    Score one split with the checkpoint's parameters and write ``metrics.csv``, ``per_relation.csv`` and,
    for multi-class runs, ``relation_bins.csv``.

    :param checkpoint: Trained model.
    :param split: ``train``, ``dev`` or ``test``.
    :param out_dir: Output directory, defaults to the run's.
    :param ap_mode: AP@50 flavour.
    :param bin_edges: Train-support bins of the low-data analysis.
    :param data: Already prepared data of the checkpoint's run.
    :param threads: Worker threads for prediction.
    :return:
    """
    if split not in SPLITS:
        raise ConfigError(f'Unknown split {split!r}; valid splits: {", ".join(SPLITS)}')
    data = data or _checked_data(checkpoint)
    dataset = getattr(data.splits, split)
    _check_task_mode(checkpoint, dataset.task_mode)
    offset = data.graph.ddi_offset
    records = predict(
        checkpoint.params,
        data.graph,
        dataset,
        checkpoint.model,
        data.fingerprints,
        forbidden=known_triplets(data.splits, offset),
        seed=checkpoint.run.train.seed,
        threads=threads,
    )
    report = evaluate(records, dataset.num_relations, ap_mode=ap_mode)
    out_dir = out_dir or checkpoint.run.data.out_dir
    write_csv(report.to_frame(), out_dir / 'metrics.csv')
    write_csv(report.per_relation, out_dir / 'per_relation.csv')
    if report.task_mode is TaskMode.multi_class:
        bins = relation_bin_analysis(report.per_relation['f1'], data.splits.train.label_counts(), bin_edges)
        write_csv(bins, out_dir / 'relation_bins.csv')
    for name, value in report.values.items():
        log.info('%s %s = %.6f', split, name, value)
    return report


def resolve_drug(graph: KnowledgeGraph, name: str) -> int:
    index = graph.entity_index()
    if name in index:
        return index[name]
    suggestions = difflib.get_close_matches(name, list(index), n=5)
    hint = f'; nearest known names: {", ".join(suggestions)}' if suggestions else ''
    raise EntityNotFoundError(f'Unknown drug {name!r}{hint}', suggestions)


def explain_pair(
    checkpoint: Checkpoint,
    drug_u: str,
    drug_v: str,
    out_dir: Path,
    gamma: float | None = None,
    merge: bool = False,
    data: PreparedData | None = None,
) -> tuple[PredictionRecord, Path, Path]:
    """
    Predict one pair and write its reasoning pathway as ``pathway.dot`` and ``pathway.json``.

    :param checkpoint: Trained model.
    :param drug_u: Name of the first drug.
    :param drug_v: Name of the second drug.
    :param out_dir: Output directory.
    :param gamma: Threshold overriding the trained one for the pathway only.
    :param merge: Merge antiparallel edges into undirected ones.
    :param data: Already prepared data of the checkpoint's run.
    :return:
    """
    data = data or _checked_data(checkpoint)
    graph, config = data.graph, checkpoint.model
    u, v = resolve_drug(graph, drug_u), resolve_drug(graph, drug_v)
    if u == v:
        raise ConfigError(f'explain needs two different drugs, got {drug_u!r} twice')
    subgraph = pair_subgraph(graph, u, v, config.k)
    result = run_model(subgraph, checkpoint.params, config, data.fingerprints)
    logits = result.logits.data.reshape(-1)
    task_mode = checkpoint.run.train.task_mode
    scores = softmax(logits) if task_mode is TaskMode.multi_class else sigmoid(logits)
    record = PredictionRecord((u, v), (), logits, scores, task_mode)
    mask = result.masks[0]
    if gamma is not None and config.use_summarization:
        mask = compute_attention(subgraph, result.features, checkpoint.params, gamma)
    pathway = summarize_pathway(subgraph, mask, graph)
    if merge:
        pathway = merge_antiparallel(pathway)
    log.info('Pathway keeps %d of %d edges', len(pathway.edges), subgraph.num_edges)
    return record, export_dot(pathway, out_dir / 'pathway.dot'), export_json(pathway, out_dir / 'pathway.json')


def run_sweep(run: RunConfig, axis: str, values: Sequence[float], ap_mode: str = 'precision') -> pd.DataFrame:
    """
    One full train and test evaluation per value of ``axis``, defaults elsewhere.

    :param run: Base configuration.
    :param axis: ``k``, ``d`` or ``gamma``.
    :param values: Values to try.
    :param ap_mode: AP@50 flavour.
    :return: One row per value with the test metrics and the kept-edge statistics.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f'Invalid sweep axis {axis!r}; valid axes: {", ".join(SWEEP_AXES)}')
    if not values:
        raise ConfigError('Sweep needs at least one value')
    rows = []
    for value in values:
        overrides = sweep_override(axis, value)
        out_dir = run.data.out_dir / 'sweep' / f'{axis}={value:g}'
        overrides['data.out_dir'] = out_dir
        point = apply_overrides(run, overrides)
        outcome = run_training(point)
        checkpoint = load_checkpoint(outcome.checkpoint)
        report = evaluate_checkpoint(
            checkpoint, 'test', out_dir, ap_mode, data=outcome.data, threads=run.train.threads
        )
        test_subgraphs = [
            pair_subgraph(outcome.data.graph, p.head, p.tail, checkpoint.model.k)
            for p in outcome.data.splits.test.pairs
        ]
        kept, total = count_kept_edges(test_subgraphs, checkpoint.params, checkpoint.model)
        log.info('%s=%g: kept %d of %d test subgraph edges', axis, value, kept, total)
        rows.append(
            {
                'value': value,
                **report.values,
                'kept_edges': kept,
                'total_edges': total,
                'kept_edge_fraction': kept / total if total else 1.0,
            }
        )
    return pd.DataFrame(rows)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, help='TOML run configuration')
    parser.add_argument('--seed', type=int, help='seed of the split, initialisation and training streams')
    parser.add_argument('--threads', type=int, help='worker threads; 1 guarantees bitwise reproducibility')
    parser.add_argument('--k', type=int, help='hop budget of the enclosing subgraphs')
    parser.add_argument('--dim', type=int, help='hidden dimension d')
    parser.add_argument('--gamma', type=float, help='attention pruning threshold')
    parser.add_argument('--epochs', type=int, help='training epochs')
    parser.add_argument('--ablation', action='append', choices=list(ABLATIONS), help='ablation, repeatable')
    parser.add_argument('--out', type=Path, help='output directory')
    parser.add_argument('--log-level', default='INFO', help='logging level')
    parser.add_argument('--quiet', action='store_true', help='disable progress bars')


def _data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--kg', type=Path, help='knowledge graph triplet file')
    parser.add_argument('--ddi', type=Path, help='drug pair file')
    parser.add_argument('--fingerprints', type=Path, help='fingerprint file')
    parser.add_argument('--task-mode', choices=[m.value for m in TaskMode], help='multi-class or multi-label')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='subgraph-ddi', description='Subgraph-anchored relational GNN for DDI')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)

    train = commands.add_parser('train', help='train a model and write a checkpoint')
    _common(train)
    _data_args(train)

    evaluation = commands.add_parser('eval', help='evaluate a checkpoint on a split')
    _common(evaluation)
    evaluation.add_argument('--checkpoint', type=Path, required=True)
    evaluation.add_argument('--split', default='test', choices=SPLITS)
    evaluation.add_argument('--ddi', type=Path, help='evaluate on another drug pair file')
    evaluation.add_argument('--task-mode', choices=[m.value for m in TaskMode], help='task mode of the data')
    evaluation.add_argument('--ap-mode', default='precision', choices=AP_MODES)
    evaluation.add_argument('--bins', type=float, nargs='+', help='bin edges of the low-data analysis')

    explain = commands.add_parser('explain', help='predict a pair and export its reasoning pathway')
    _common(explain)
    explain.add_argument('--checkpoint', type=Path, required=True)
    explain.add_argument('drug_u')
    explain.add_argument('drug_v')
    explain.add_argument('--merge-antiparallel', action='store_true')

    sweep = commands.add_parser('sweep', help='train and evaluate once per parameter value')
    _common(sweep)
    _data_args(sweep)
    sweep.add_argument('--axis', required=True, help=f'one of {", ".join(SWEEP_AXES)}')
    sweep.add_argument('--values', type=float, nargs='+', required=True)
    sweep.add_argument('--ap-mode', default='precision', choices=AP_MODES)

    bench = commands.add_parser('bench', help='count and time subgraph versus full-graph propagation')
    _common(bench)
    _data_args(bench)
    bench.add_argument('--k-values', type=int, nargs='+', default=[1, 2])
    bench.add_argument('--full-graph', action='store_true')
    bench.add_argument('--sample-pairs', type=int, default=3)

    synth = commands.add_parser('gen-synth', help='generate the planted-motif dataset')
    synth.add_argument('--out', type=Path, required=True)
    synth.add_argument('--num-drugs', type=int, default=500)
    synth.add_argument('--num-genes', type=int, default=2000)
    synth.add_argument('--classes', type=int, default=4)
    synth.add_argument('--m', type=int, default=3, help='background KG edges per drug')
    synth.add_argument('--noise-edges', type=int, default=2000)
    synth.add_argument('--num-pairs', type=int, default=1000)
    synth.add_argument('--bits', type=int, default=1024)
    synth.add_argument('--no-inverse', action='store_true', help='do not add inverse relations')
    synth.add_argument('--seed', type=int, default=7)
    synth.add_argument('--log-level', default='INFO')

    inspect = commands.add_parser('inspect-checkpoint', help='print a checkpoint summary')
    inspect.add_argument('checkpoint', type=Path)
    inspect.add_argument('--log-level', default='INFO')
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        'model.k': args.k,
        'model.d': args.dim,
        'model.gamma': args.gamma,
        'data.seed': args.seed,
        'train.seed': args.seed,
        'train.epochs': args.epochs,
        'train.threads': args.threads,
        'train.progress': False if args.quiet else None,
        'data.out_dir': args.out,
        'ablation': args.ablation,
    }
    for flag, key in (('kg', 'data.kg_file'), ('ddi', 'data.ddi_file'), ('fingerprints', 'data.fingerprint_file')):
        overrides[key] = getattr(args, flag, None)
    overrides['train.task_mode'] = getattr(args, 'task_mode', None)
    return apply_overrides(load_config(args.config), overrides)


def cmd_train(args: argparse.Namespace) -> None:
    outcome = run_training(run_config_from_args(args))
    print(f'checkpoint: {outcome.checkpoint}')
    print(f'history: {outcome.history}')


def _checkpoint_run(args: argparse.Namespace, checkpoint: Checkpoint) -> RunConfig:
    overrides = {'data.out_dir': args.out, 'train.threads': args.threads}
    return apply_overrides(checkpoint.run, overrides)


def cmd_eval(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    run = _checkpoint_run(args, checkpoint)
    if args.ddi is not None:
        run = apply_overrides(run, {'data.ddi_file': args.ddi})
    data_mode = TaskMode(args.task_mode) if args.task_mode is not None else detect_task_mode(run.data.ddi_file)
    _check_task_mode(checkpoint, data_mode)
    data = _checked_data(checkpoint, run)
    report = evaluate_checkpoint(
        checkpoint,
        args.split,
        run.data.out_dir,
        args.ap_mode,
        args.bins or DEFAULT_BIN_EDGES,
        data=data,
        threads=run.train.threads,
    )
    for name, value in report.values.items():
        print(f'{name}: {value:.6f}')


def cmd_explain(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    run = _checkpoint_run(args, checkpoint)
    record, dot, doc = explain_pair(
        checkpoint,
        args.drug_u,
        args.drug_v,
        run.data.out_dir,
        gamma=args.gamma,
        merge=args.merge_antiparallel,
        data=_checked_data(checkpoint, run),
    )
    relation = checkpoint.relation_names[checkpoint.ddi_offset + record.predicted]
    print(f'predicted: {relation} (p={record.probability:.6f})')
    print(f'pathway: {dot} {doc}')


def cmd_sweep(args: argparse.Namespace) -> None:
    run = run_config_from_args(args)
    frame = run_sweep(run, args.axis, args.values, args.ap_mode)
    print(f'sweep: {write_csv(frame, run.data.out_dir / "sweep.csv")}')


def cmd_bench(args: argparse.Namespace) -> None:
    run = run_config_from_args(args)
    data = prepare_data(run)
    model: ModelConfig = run.effective_model().model_copy(
        update={'num_ddi_relations': data.splits.train.num_relations}
    )
    bench = BenchConfig(
        k_values=tuple(args.k_values),
        full_graph=args.full_graph,
        sample_pairs=args.sample_pairs,
        seed=run.train.seed,
        progress=run.train.progress,
    )
    pairs = [(p.head, p.tail) for p in data.splits.train.pairs]
    frame = run_bench(data.graph, pairs, model, bench, data.fingerprints)
    print(f'bench: {write_csv(frame, run.data.out_dir / "bench.csv")}')


def cmd_gen_synth(args: argparse.Namespace) -> None:
    try:
        spec = SynthSpec(
            num_drugs=args.num_drugs,
            num_genes=args.num_genes,
            num_ddi_classes=args.classes,
            kg_relations_per_drug=args.m,
            noise_edges=args.noise_edges,
            num_pairs=args.num_pairs,
            fingerprint_bits=args.bits,
            add_inverse=not args.no_inverse,
            seed=args.seed,
        )
    except ValidationError as e:
        raise ConfigError(str(e))
    files = gen_synth(spec, args.out)
    for name, path in files._asdict().items():
        print(f'{name}: {path}')


def cmd_inspect_checkpoint(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    print(f'format version: {checkpoint.format_version}')
    print(f'best epoch: {checkpoint.best_epoch} (val_loss {checkpoint.best_val_loss!r})')
    print(f'task mode: {checkpoint.run.train.task_mode.value}')
    print(f'ablations: {", ".join(checkpoint.run.ablation.names) or "none"}')
    print(f'entities: {len(checkpoint.entity_names)}, relations: {len(checkpoint.relation_names)}')
    print(f'model: {checkpoint.model.model_dump_json()}')
    for name, shape in checkpoint.params.shapes().items():
        print(f'  {name}: {"x".join(map(str, shape))}')
    if checkpoint.adam is not None:
        print(f'optimizer steps: {checkpoint.adam.t}')


COMMANDS = {
    'train': cmd_train,
    'eval': cmd_eval,
    'explain': cmd_explain,
    'sweep': cmd_sweep,
    'bench': cmd_bench,
    'gen-synth': cmd_gen_synth,
    'inspect-checkpoint': cmd_inspect_checkpoint,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        COMMANDS[args.command](args)
    except ConfigError as e:
        log.error('%s', e)
        return 2
    except SubgraphDDIException as e:
        log.error('%s', e)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
