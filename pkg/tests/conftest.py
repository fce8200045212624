#!/usr/bin/env python3
# -*- coding: utf-8 -*-
from typing import NamedTuple

import pandas as pd
import pytest

from subgraph_ddi.graph import (
    DDISplits,
    KnowledgeGraph,
    build_propagation_graph,
    load_ddi,
    load_kg,
    split_dataset,
)
from subgraph_ddi.model import FingerprintTable
from subgraph_ddi.synth import SynthFiles, gen_synth
from subgraph_ddi.train import FitResult, TrainConfig, fit
from subgraph_ddi.types import TaskMode
from tests.graphs import SMALL_MODEL, SMALL_SYNTH, toy_graph


class Prepared(NamedTuple):
    kg: KnowledgeGraph
    splits: DDISplits
    graph: KnowledgeGraph
    fingerprints: FingerprintTable


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run long designed experiments')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long designed experiment, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


def prepare(files: SynthFiles, ddi_file, task_mode: TaskMode) -> Prepared:
    kg = load_kg(files.kg_file)
    ddi = load_ddi(ddi_file, task_mode, kg)
    splits = split_dataset(ddi, seed=0)
    graph = build_propagation_graph(kg, splits.train, (splits.dev, splits.test))
    bits = SMALL_SYNTH.fingerprint_bits
    fingerprints = FingerprintTable.from_file(files.fingerprint_file, graph.entity_index(), bits)
    return Prepared(kg, splits, graph, fingerprints)


@pytest.fixture
def toy():
    return toy_graph()


@pytest.fixture(scope='session')
def synth_files(tmp_path_factory) -> SynthFiles:
    return gen_synth(SMALL_SYNTH, tmp_path_factory.mktemp('synth'))


@pytest.fixture(scope='session')
def synth_data(synth_files) -> Prepared:
    return prepare(synth_files, synth_files.ddi_file, TaskMode.multi_class)


@pytest.fixture(scope='session')
def multilabel_data(synth_files, tmp_path_factory) -> Prepared:
    truth = pd.read_csv(synth_files.truth_file, sep='\t')
    path = tmp_path_factory.mktemp('multilabel') / 'ddi.tsv'
    lines = [f'{u}\t{v}\t{a},{2 + b}\n' for u, v, a, b in zip(truth['drug1'], truth['drug2'], truth['a'], truth['b'])]
    path.write_text(''.join(lines), encoding='utf-8')
    return prepare(synth_files, path, TaskMode.multi_label)


@pytest.fixture(scope='session')
def train_config() -> TrainConfig:
    return TrainConfig(epochs=2, batch_size=16, lr=0.01, progress=False, seed=0)


@pytest.fixture(scope='session')
def fitted(synth_data, train_config) -> FitResult:
    return fit(synth_data.graph, synth_data.splits, SMALL_MODEL, train_config, synth_data.fingerprints)
