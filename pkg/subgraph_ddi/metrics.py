#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import logging
import math

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from sklearn.metrics import (
    accuracy_score,
    average_precision_score,
    cohen_kappa_score,
    f1_score,
    roc_auc_score,
)

from subgraph_ddi.errors import TaskModeError
from subgraph_ddi.train import PredictionRecord
from subgraph_ddi.types import TaskMode

log = logging.getLogger(__name__)

DEFAULT_BIN_EDGES = (0, 10, 50, 200, 1000, math.inf)
AP_MODES = ('precision', 'average')


@dataclass
class MetricsReport:
    """Averaged metrics plus the per-relation breakdown they were averaged from."""

    task_mode: TaskMode
    values: dict[str, float]
    per_relation: pd.DataFrame = field(repr=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'metric': list(self.values), 'value': list(self.values.values())})

    def __getitem__(self, name: str) -> float:
        return self.values[name]


def _require(records: Sequence[PredictionRecord]) -> None:
    if not records:
        raise ValueError('No prediction records')


def _classes(records: Sequence[PredictionRecord], num_relations: int | None) -> list[int]:
    return list(range(num_relations if num_relations is not None else len(records[0].scores)))


def _truth_and_predictions(records: Sequence[PredictionRecord]) -> tuple[np.ndarray, np.ndarray]:
    if any(r.task_mode is not TaskMode.multi_class for r in records):
        raise TaskModeError('Classification metrics need multi-class records')
    return np.array([r.labels[0] for r in records]), np.array([r.predicted for r in records])


def macro_f1(records: Sequence[PredictionRecord], num_relations: int | None = None) -> float:
    """
    Unweighted mean F1 over all relation types; a type with neither truth nor predictions scores 0.

    :param records: Multi-class predictions.
    :param num_relations: Number of relation types, defaults to the score width.
    :return:
    """
    _require(records)
    y_true, y_pred = _truth_and_predictions(records)
    return float(f1_score(y_true, y_pred, labels=_classes(records, num_relations), average='macro', zero_division=0))


def per_class_f1(records: Sequence[PredictionRecord], num_relations: int | None = None) -> np.ndarray:
    _require(records)
    y_true, y_pred = _truth_and_predictions(records)
    return f1_score(y_true, y_pred, labels=_classes(records, num_relations), average=None, zero_division=0)


def accuracy(records: Sequence[PredictionRecord]) -> float:
    _require(records)
    return float(accuracy_score(*_truth_and_predictions(records)))


def cohens_kappa(records: Sequence[PredictionRecord], num_relations: int | None = None) -> float:
    """``(p_o - p_e) / (1 - p_e)``; full agreement on a single class counts as 1."""
    _require(records)
    y_true, y_pred = _truth_and_predictions(records)
    if len(set(y_true.tolist()) | set(y_pred.tolist())) == 1:
        return 1.0
    return float(cohen_kappa_score(y_true, y_pred, labels=_classes(records, num_relations)))


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve; tied scores count half a concordant pair."""
    return float(roc_auc_score(np.asarray(labels), np.asarray(scores, dtype=np.float64)))


def pr_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the precision-recall curve by step integration."""
    return float(average_precision_score(np.asarray(labels), np.asarray(scores, dtype=np.float64)))


def _ranking(scores: Sequence[float]) -> np.ndarray:
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind='stable')


def ap_at_k(scores: Sequence[float], labels: Sequence[int], k: int = 50) -> float:
    """
    Precision among the ``k`` highest-scoring items. Lists shorter than ``k`` are divided by their length.

    :param scores: Item scores.
    :param labels: 0/1 truth.
    :param k: Cut-off.
    :return:
    """
    if k < 1:
        raise ValueError(f'k must be positive, got {k}')
    labels = np.asarray(labels)
    top = _ranking(scores)[:k]
    if not len(top):
        raise ValueError('ap_at_k: no items')
    return float(labels[top].sum() / min(k, len(labels)))


def average_precision_at_k(scores: Sequence[float], labels: Sequence[int], k: int = 50) -> float:
    """Mean of precision@i over the ranks ``i <= k`` holding a positive, normalised by ``min(k, positives)``."""
    if k < 1:
        raise ValueError(f'k must be positive, got {k}')
    labels = np.asarray(labels)
    hits = labels[_ranking(scores)[:k]].astype(np.float64)
    positives = int(labels.sum())
    if not positives:
        return 0.0
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float((precision * hits).sum() / min(k, positives))


def relation_scores(records: Sequence[PredictionRecord], r: int) -> tuple[np.ndarray, np.ndarray]:
    """Scores and 0/1 truth of relation ``r``: its positive pairs and the negatives sampled for it."""
    scores, labels = [], []
    for record in records:
        if record.negative_for == r:
            scores.append(record.scores[r])
            labels.append(0)
        elif not record.is_negative and r in record.labels:
            scores.append(record.scores[r])
            labels.append(1)
    return np.array(scores), np.array(labels, dtype=np.int64)


def _multi_class_report(records: Sequence[PredictionRecord], num_relations: int | None) -> MetricsReport:
    classes = _classes(records, num_relations)
    y_true, _ = _truth_and_predictions(records)
    values = {
        'macro_f1': macro_f1(records, len(classes)),
        'accuracy': accuracy(records),
        'cohens_kappa': cohens_kappa(records, len(classes)),
    }
    table = pd.DataFrame(
        {
            'relation': classes,
            'support': np.bincount(y_true, minlength=len(classes))[: len(classes)],
            'f1': per_class_f1(records, len(classes)),
        }
    )
    return MetricsReport(TaskMode.multi_class, values, table)


def _multi_label_report(
    records: Sequence[PredictionRecord], num_relations: int | None, k: int, ap_mode: str
) -> MetricsReport:
    if any(r.task_mode is not TaskMode.multi_label for r in records):
        raise TaskModeError('Ranking metrics need multi-label records')
    ap = ap_at_k if ap_mode == 'precision' else average_precision_at_k
    rows = []
    for r in _classes(records, num_relations):
        scores, labels = relation_scores(records, r)
        support = int(labels.sum())
        if not support or support == len(labels):
            continue
        rows.append((r, support, roc_auc(scores, labels), pr_auc(scores, labels), ap(scores, labels, k)))
    table = pd.DataFrame(rows, columns=['relation', 'support', 'roc_auc', 'pr_auc', f'ap_at_{k}'])
    if table.empty:
        raise ValueError('No relation type has both positives and negatives')
    log.debug('Averaged ranking metrics over %d relation types', len(table))
    values = {
        'roc_auc': float(table['roc_auc'].mean()),
        'pr_auc': float(table['pr_auc'].mean()),
        f'ap_at_{k}': float(table[f'ap_at_{k}'].mean()),
    }
    return MetricsReport(TaskMode.multi_label, values, table)


def evaluate(
    records: Sequence[PredictionRecord],
    num_relations: int | None = None,
    k: int = 50,
    ap_mode: str = 'precision',
) -> MetricsReport:
    """
    Metric suite for the records' task mode: macro F1, accuracy and kappa for multi-class; per-type
    ROC-AUC, PR-AUC and AP@k averaged over types for multi-label.

    :param records: Predictions, including negative counterparts for multi-label.
    :param num_relations: Number of relation types.
    :param k: AP cut-off.
    :param ap_mode: ``precision`` (precision at k) or ``average`` (average precision at k).
    :return:
    """
    _require(records)
    if ap_mode not in AP_MODES:
        raise ValueError(f'Unknown AP mode {ap_mode!r}, expected one of {AP_MODES}')
    if records[0].task_mode is TaskMode.multi_class:
        return _multi_class_report(records, num_relations)
    return _multi_label_report(records, num_relations, k, ap_mode)


def relation_bin_analysis(
    per_relation_f1: Sequence[float],
    train_counts: Sequence[int],
    bin_edges: Sequence[float] = DEFAULT_BIN_EDGES,
) -> pd.DataFrame:
    """
    Mean per-class F1 of relation types grouped by train-set support into ``[edge_i, edge_i+1)`` bins.
    Bins holding no relation type are left out.

    :param per_relation_f1: F1 per relation type.
    :param train_counts: Train-set support per relation type.
    :param bin_edges: Increasing bin boundaries.
    :return: Columns ``bin,lower,upper,num_relations,mean_f1``.
    """
    f1 = np.asarray(per_relation_f1, dtype=np.float64)
    counts = np.asarray(train_counts)
    if f1.shape != counts.shape:
        raise ValueError(f'{len(f1)} F1 values for {len(counts)} relation counts')
    edges = list(bin_edges)
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError(f'Bin edges must be increasing, got {edges}')
    rows = []
    for lower, upper in zip(edges, edges[1:]):
        members = (counts >= lower) & (counts < upper)
        if not members.any():
            continue
        label = f'[{lower:g},{upper:g})' if math.isfinite(upper) else f'[{lower:g},inf)'
        rows.append((label, lower, upper, int(members.sum()), float(f1[members].mean())))
    return pd.DataFrame(rows, columns=['bin', 'lower', 'upper', 'num_relations', 'mean_f1'])
