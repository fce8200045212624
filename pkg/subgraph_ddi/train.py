#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import logging

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import pandas as pd

from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from subgraph_ddi.errors import (
    ConfigError,
    EntityNotFoundError,
    ShapeError,
    StageError,
    SubgraphDDIException,
    TaskModeError,
)
from subgraph_ddi.graph import (
    DDIDataset,
    DDISplits,
    DegreeTable,
    EnclosingSubgraph,
    KnowledgeGraph,
    pair_subgraph,
    sample_negative_tail,
)
from subgraph_ddi.model import (
    FingerprintTable,
    ModelConfig,
    ModelParams,
    forward,
    init_params,
    transe_pretrain,
)
from subgraph_ddi.tensor import (
    AdamState,
    Tape,
    Tensor,
    adam_step,
    add,
    backward,
    clip_global_norm,
    log_softmax_rows,
    mul,
    scale,
    softplus,
    sum_all,
)
from subgraph_ddi.types import Mode, TaskMode
from subgraph_ddi.utils import rng_stream

log = logging.getLogger(__name__)

EVALUATION_STREAM = 2**31 - 1


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    epochs: int = Field(50, ge=1)
    batch_size: int = Field(256, ge=1)
    lr: float = Field(5e-3, gt=0.0)
    weight_decay: float = Field(1e-5, ge=0.0)
    clip_norm: float = Field(10.0, gt=0.0)
    task_mode: TaskMode = TaskMode.multi_class
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    progress: bool = True


@dataclass(frozen=True)
class Example:
    """One supervised edge: a pair with one label, plus a negative tail for multi-label scoring."""

    head: int
    tail: int
    label: int
    negative: int | None = None


@dataclass(frozen=True)
class PredictionRecord:
    pair: tuple[int, int]
    labels: tuple[int, ...]
    logits: np.ndarray
    scores: np.ndarray
    task_mode: TaskMode
    negative_for: int | None = None

    @property
    def predicted(self) -> int:
        """Highest-scoring relation; ties resolve to the lowest id."""
        return int(np.argmax(self.scores))

    @property
    def probability(self) -> float:
        return float(self.scores[self.predicted])

    @property
    def is_negative(self) -> bool:
        return self.negative_for is not None


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class FitResult:
    params: ModelParams
    history: list[EpochRecord]
    adam: AdamState
    best_epoch: int
    best_val_loss: float
    model_config: ModelConfig
    final_params: ModelParams | None = field(default=None, repr=False)

    def __iter__(self) -> Iterator:
        return iter((self.params, self.history))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def sigmoid(logits: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(logits))
    return np.where(logits >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _pick(logits: Tensor, r: int) -> Tensor:
    width = logits.shape[-1]
    if not 0 <= r < width:
        raise EntityNotFoundError(f'Label {r} outside [0, {width})')
    onehot = np.zeros(logits.shape)
    onehot[..., r] = 1.0
    return sum_all(mul(logits, Tensor(onehot)))


def cross_entropy(logits: Tensor, true_label: int) -> Tensor:
    """``-log softmax(logits)[true_label]`` for a ``(1, R)`` logit row."""
    if logits.data.ndim != 2 or logits.shape[0] != 1:
        raise ShapeError(f'cross_entropy expects a (1, R) row, got {logits.shape}')
    return scale(_pick(log_softmax_rows(logits), true_label), -1.0)


def bce_with_negative(logits_pos: Tensor, logits_neg: Tensor, r: int) -> Tensor:
    """``-log σ(pos[r]) - log(1 - σ(neg[r]))`` written as two softplus terms."""
    return add(softplus(scale(_pick(logits_pos, r), -1.0)), softplus(_pick(logits_neg, r)))


def total_loss(losses: Sequence[Tensor]) -> Tensor:
    """Sum of per-edge losses over a batch."""
    if not losses:
        raise ShapeError('total_loss: empty batch')
    return reduce(add, losses)


def make_examples(dataset: DDIDataset) -> list[Example]:
    """One example per pair in multi-class mode, one per (pair, label) in multi-label mode."""
    return [Example(p.head, p.tail, label) for p in dataset.pairs for label in p.labels]


def known_triplets(splits: DDISplits | Sequence[DDIDataset], offset: int) -> frozenset[tuple[int, int, int]]:
    """Every positive DDI triplet of every split, which negative tails may not reproduce."""
    known: set[tuple[int, int, int]] = set()
    for split in splits:
        known |= split.positive_triplets(offset)
    return frozenset(known)


def evaluation_examples(
    dataset: DDIDataset,
    graph: KnowledgeGraph,
    forbidden: frozenset[tuple[int, int, int]] | None = None,
    seed: int = 0,
) -> list[Example]:
    """
    Examples of ``dataset`` with, in multi-label mode, one negative tail per positive drawn once from a
    fixed stream so that every evaluation of the split scores the same negatives.

    :param dataset: Split to evaluate.
    :param graph: Propagation graph providing degrees and the DDI relation offset.
    :param forbidden: Known positives; defaults to the split's own.
    :param seed: Seed of the negative stream.
    :return:
    """
    examples = make_examples(dataset)
    if dataset.task_mode is TaskMode.multi_class:
        return examples
    offset = graph.ddi_offset or 0
    forbidden = forbidden if forbidden is not None else frozenset(dataset.positive_triplets(offset))
    degrees = DegreeTable.from_graph(graph)
    rng = rng_stream(seed, EVALUATION_STREAM)
    out = []
    for e in examples:
        negative = sample_negative_tail(degrees, (e.head, offset + e.label, e.tail), forbidden, rng)
        out.append(Example(e.head, e.tail, e.label, negative))
    return out


class SubgraphCache:
    """Pair subgraphs of one propagation graph, extracted once."""

    def __init__(self, graph: KnowledgeGraph, k: int) -> None:
        self.graph = graph
        self.k = k
        self._store: dict[tuple[int, int], EnclosingSubgraph] = {}

    def __len__(self) -> int:
        return len(self._store)

    def get(self, u: int, v: int) -> EnclosingSubgraph:
        key = (u, v)
        subgraph = self._store.get(key)
        if subgraph is None:
            subgraph = pair_subgraph(self.graph, u, v, self.k)
            self._store[key] = subgraph
        return subgraph

    def warm(self, pairs: Iterable[tuple[int, int]], desc: str = 'subgraphs', progress: bool = False) -> None:
        for u, v in tqdm(list(pairs), desc=desc, disable=not progress, leave=False):
            self.get(u, v)


def example_loss(
    example: Example,
    params: ModelParams | dict[str, Tensor],
    config: ModelConfig,
    task_mode: TaskMode,
    cache: SubgraphCache,
    fingerprints: FingerprintTable | None,
    mode: Mode = Mode.infer,
    rng: np.random.Generator | None = None,
    negative: int | None = None,
) -> Tensor:
    """
    Loss of one supervised edge. Multi-label examples need a negative tail, either ``negative`` or the
    example's fixed one.
    """
    logits = forward(cache.get(example.head, example.tail), params, config, fingerprints, mode, rng)
    if task_mode is TaskMode.multi_class:
        return cross_entropy(logits, example.label)
    negative = example.negative if negative is None else negative
    if negative is None:
        raise TaskModeError('Multi-label example without a negative tail')
    negative_logits = forward(
        pair_subgraph(cache.graph, example.head, negative, config.k), params, config, fingerprints, mode, rng
    )
    return bce_with_negative(logits, negative_logits, example.label)


def validation_loss(
    params: ModelParams,
    examples: Sequence[Example],
    config: ModelConfig,
    task_mode: TaskMode,
    cache: SubgraphCache,
    fingerprints: FingerprintTable | None = None,
) -> float:
    """Mean per-edge loss in inference mode."""
    if not examples:
        raise ShapeError('validation_loss: no examples')
    total = sum(example_loss(e, params, config, task_mode, cache, fingerprints).item() for e in examples)
    return total / len(examples)


def _resolve_model_config(config: ModelConfig, num_ddi_relations: int) -> ModelConfig:
    if config.num_ddi_relations is None:
        return config.model_copy(update={'num_ddi_relations': num_ddi_relations})
    if config.num_ddi_relations != num_ddi_relations:
        raise ConfigError(
            f'model.num_ddi_relations={config.num_ddi_relations} but the data has {num_ddi_relations} relation types'
        )
    return config


def history_frame(history: Sequence[EpochRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            'epoch': [h.epoch for h in history],
            'train_loss': [h.train_loss for h in history],
            'val_loss': [h.val_loss for h in history],
        }
    )


class _Trainer:
    def __init__(
        self,
        graph: KnowledgeGraph,
        splits: DDISplits,
        config: ModelConfig,
        train_config: TrainConfig,
        fingerprints: FingerprintTable | None,
    ) -> None:
        self.graph = graph
        self.config = config
        self.train_config = train_config
        self.task_mode = train_config.task_mode
        self.fingerprints = fingerprints
        self.cache = SubgraphCache(graph, config.k)
        self.offset = graph.ddi_offset or 0
        self.degrees = DegreeTable.from_graph(graph)
        self.forbidden = known_triplets(splits, self.offset)
        self.examples = make_examples(splits.train)

    def gradient(self, params: ModelParams, index: int, epoch: int) -> tuple[float, dict[str, np.ndarray]]:
        example = self.examples[index]
        rng = rng_stream(self.train_config.seed, epoch, index)
        negative = None
        if self.task_mode is TaskMode.multi_label:
            positive = (example.head, self.offset + example.label, example.tail)
            negative = sample_negative_tail(self.degrees, positive, self.forbidden, rng)
        leaves = params.leaves()
        with Tape():
            loss = example_loss(
                example, leaves, self.config, self.task_mode, self.cache, self.fingerprints, Mode.train, rng, negative
            )
            backward(loss)
        return loss.item(), {name: leaf.grad_or_zeros() for name, leaf in leaves.items()}

    def batch(
        self, params: ModelParams, indices: Sequence[int], epoch: int, pool: ThreadPoolExecutor | None
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Summed loss and gradients, reduced in batch order whatever the thread count."""
        total_loss_value = 0.0
        grads: dict[str, np.ndarray] | None = None
        chunk = max(1, 4 * self.train_config.threads)
        for start in range(0, len(indices), chunk):
            part = indices[start : start + chunk]
            if pool is None:
                results = (self.gradient(params, int(i), epoch) for i in part)
            else:
                results = pool.map(lambda i: self.gradient(params, int(i), epoch), part)
            for loss, g in results:
                total_loss_value += loss
                if grads is None:
                    grads = {name: value.copy() for name, value in g.items()}
                else:
                    for name, value in g.items():
                        grads[name] += value
        return total_loss_value, grads


def fit(
    graph: KnowledgeGraph,
    splits: DDISplits,
    model_config: ModelConfig,
    train_config: TrainConfig,
    fingerprints: FingerprintTable | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> FitResult:
    """
    Train with Adam over shuffled batches and keep the parameters of the epoch with the lowest validation loss.

    :param graph: Propagation graph built from the train split only.
    :param splits: Train/dev/test pairs; dev drives model selection.
    :param model_config: Architecture; ``num_ddi_relations`` is filled from the data when unset.
    :param train_config: Optimisation settings.
    :param fingerprints: Drug fingerprints.
    :param on_epoch: Called after every epoch with its record.
    :return:
    """
    task_mode = train_config.task_mode
    if splits.train.task_mode is not task_mode:
        raise TaskModeError(
            f'task mode mismatch: training configured for {task_mode.value}, data is {splits.train.task_mode.value}'
        )
    if not len(splits.train):
        raise ShapeError('fit: empty train split')
    config = _resolve_model_config(model_config, splits.train.num_relations)
    seed = train_config.seed

    embed = None
    if config.transe_epochs:
        embed = transe_pretrain(
            graph, config.d, config.transe_epochs, margin=config.transe_margin, lr=config.transe_lr, seed=seed
        )
    params = init_params(config, graph.num_entities, graph.num_relations, seed=seed, entity_embed=embed)
    adam = AdamState.zeros_like(params.tensors)

    trainer = _Trainer(graph, splits, config, train_config, fingerprints)
    dev = splits.dev if len(splits.dev) else splits.train
    if not len(splits.dev):
        log.warning('Empty dev split, selecting the best epoch on the train loss')
    dev_examples = evaluation_examples(dev, graph, trainer.forbidden, seed)
    trainer.cache.warm(((e.head, e.tail) for e in trainer.examples), 'train subgraphs', train_config.progress)
    trainer.cache.warm(((e.head, e.tail) for e in dev_examples), 'dev subgraphs', train_config.progress)
    log.info(
        'Training on %d examples (%d dev), %d cached subgraphs, %d parameters',
        len(trainer.examples),
        len(dev_examples),
        len(trainer.cache),
        sum(v.size for v in params.tensors.values()),
    )

    history: list[EpochRecord] = []
    best_params, best_epoch, best_val = params.copy(), 0, float('inf')
    pool = ThreadPoolExecutor(max_workers=train_config.threads) if train_config.threads > 1 else None
    try:
        for epoch in range(1, train_config.epochs + 1):
            order = rng_stream(seed, epoch).permutation(len(trainer.examples))
            starts = range(0, len(order), train_config.batch_size)
            epoch_loss = 0.0
            bar = tqdm(starts, desc=f'epoch {epoch}', disable=not train_config.progress, leave=False)
            for batch_index, start in enumerate(bar):
                indices = order[start : start + train_config.batch_size]
                try:
                    loss, grads = trainer.batch(params, indices, epoch, pool)
                except StageError as e:
                    raise StageError(e.msg, f'epoch {epoch} batch {batch_index} {e.stage}') from e
                except SubgraphDDIException as e:
                    raise StageError(str(e), f'epoch {epoch} batch {batch_index}') from e
                clip_global_norm(list(grads.values()), train_config.clip_norm)
                adam_step(params.tensors, grads, adam, train_config.lr, train_config.weight_decay)
                epoch_loss += loss
            train_loss = epoch_loss / len(trainer.examples)
            val_loss = validation_loss(params, dev_examples, config, task_mode, trainer.cache, fingerprints)
            record = EpochRecord(epoch, train_loss, val_loss)
            history.append(record)
            improved = val_loss < best_val
            if improved:
                best_params, best_epoch, best_val = params.copy(), epoch, val_loss
            log.info('epoch %d train_loss %.6f val_loss %.6f%s', epoch, train_loss, val_loss, ' *' if improved else '')
            if on_epoch is not None:
                on_epoch(record)
    finally:
        if pool is not None:
            pool.shutdown()
    return FitResult(
        params=best_params,
        history=history,
        adam=adam,
        best_epoch=best_epoch,
        best_val_loss=best_val,
        model_config=config,
        final_params=params,
    )


def _record(example: Example, pair_labels: tuple[int, ...], logits: np.ndarray, task_mode: TaskMode, negative: bool):
    scores = softmax(logits) if task_mode is TaskMode.multi_class else sigmoid(logits)
    if negative:
        return PredictionRecord((example.head, example.negative), (), logits, scores, task_mode, example.label)
    return PredictionRecord((example.head, example.tail), pair_labels, logits, scores, task_mode)


def predict_pair(
    params: ModelParams,
    graph: KnowledgeGraph,
    u: int,
    v: int,
    config: ModelConfig,
    task_mode: TaskMode | str = TaskMode.multi_class,
    fingerprints: FingerprintTable | None = None,
) -> PredictionRecord:
    """Scores of an arbitrary drug pair, with no truth attached."""
    task_mode = TaskMode(task_mode)
    logits = forward(pair_subgraph(graph, u, v, config.k), params, config, fingerprints).data.reshape(-1)
    return _record(Example(u, v, -1), (), logits, task_mode, negative=False)


def predict(
    params: ModelParams,
    graph: KnowledgeGraph,
    dataset: DDIDataset,
    config: ModelConfig,
    fingerprints: FingerprintTable | None = None,
    forbidden: frozenset[tuple[int, int, int]] | None = None,
    seed: int = 0,
    threads: int = 1,
) -> list[PredictionRecord]:
    """
    Score every pair of ``dataset``. Multi-label datasets also get one record per negative counterpart,
    tagged with the relation it is a negative for.

    :param params: Trained weights.
    :param graph: Propagation graph the model was trained on.
    :param dataset: Pairs to score.
    :param config: Architecture of ``params``.
    :param fingerprints: Drug fingerprints.
    :param forbidden: Known positives excluded from negative tails.
    :param seed: Seed of the fixed negative stream.
    :param threads: Worker threads for the forward passes.
    :return:
    """
    if config.num_ddi_relations is not None and config.num_ddi_relations != dataset.num_relations:
        raise TaskModeError(f'Model predicts {config.num_ddi_relations} relations, data has {dataset.num_relations}')
    task_mode = dataset.task_mode
    cache = SubgraphCache(graph, config.k)

    def logits_of(pair: tuple[int, int]) -> np.ndarray:
        return forward(cache.get(*pair), params, config, fingerprints).data.reshape(-1)

    pairs = [(p.head, p.tail) for p in dataset.pairs]
    jobs = list(pairs)
    negatives: list[Example] = []
    if task_mode is TaskMode.multi_label:
        negatives = evaluation_examples(dataset, graph, forbidden, seed)
        jobs += [(e.head, e.negative) for e in negatives]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            logits = list(pool.map(logits_of, jobs))
    else:
        logits = [logits_of(job) for job in jobs]

    records = [
        _record(Example(u, v, -1), p.labels, row, task_mode, negative=False)
        for (u, v), p, row in zip(pairs, dataset.pairs, logits)
    ]
    records += [_record(e, (), row, task_mode, negative=True) for e, row in zip(negatives, logits[len(pairs) :])]
    return records
