#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import numpy as np
import pytest

from subgraph_ddi.bench import BenchConfig, edges_touched, full_graph_edges, full_graph_view, run_bench
from subgraph_ddi.errors import ConfigError
from subgraph_ddi.graph import KnowledgeGraph, pair_subgraph
from tests.graphs import SMALL_MODEL


def test_full_graph_view(toy):
    view = full_graph_view(toy, 1, 0, 2)
    assert view.global_nodes.tolist() == [1, 0, 2, 3, 4, 5, 6, 7]
    assert view.num_edges == toy.num_triplets
    assert view.dist_u.tolist()[:3] == [0, 2, 1]
    assert view.dist_u.tolist()[-2:] == [2, 2]
    rows = view.local_edges.tolist()
    assert rows[0] == [1, 0, 2]


def test_edge_counts(toy):
    subgraphs = [pair_subgraph(toy, 0, 1, 2), pair_subgraph(toy, 0, 1, 1)]
    assert edges_touched(subgraphs, 2) == (5 + 2) * 2
    assert full_graph_edges(toy, 2, 3) == 7 * 2 * 3


def test_run_bench(synth_data):
    model = SMALL_MODEL.model_copy(update={'num_ddi_relations': 4})
    pairs = [(p.head, p.tail) for p in synth_data.splits.train.pairs[:6]]
    frame = run_bench(synth_data.graph, pairs, model, BenchConfig(full_graph=True, sample_pairs=1))
    assert frame['mode'].tolist() == ['subgraph', 'full-graph', 'subgraph', 'full-graph']
    assert frame['k'].tolist() == [1, 1, 2, 2]
    assert frame['extrapolated'].tolist() == [False, True, False, True]
    touched = frame.set_index(['k', 'mode'])['edges_touched_per_epoch']
    assert touched[(1, 'subgraph')] <= touched[(2, 'subgraph')] < touched[(2, 'full-graph')]
    assert (frame['wall_time'] >= 0).all()


def test_run_bench_errors(synth_data):
    with pytest.raises(ConfigError, match='at least one pair'):
        run_bench(synth_data.graph, [], SMALL_MODEL.model_copy(update={'num_ddi_relations': 4}))
    with pytest.raises(ConfigError, match='num_ddi_relations'):
        run_bench(synth_data.graph, [(0, 1)], SMALL_MODEL)


def test_subgraph_edges_are_a_small_share_of_a_sparse_graph():
    rng = np.random.default_rng(0)
    n, e = 5000, 50000
    triplets = np.stack([rng.integers(n, size=e), rng.integers(3, size=e), rng.integers(n, size=e)], axis=1)
    kg = KnowledgeGraph.from_triplets(triplets, n, 3)
    ends = rng.choice(n, size=(20, 2), replace=False)
    subgraphs = [pair_subgraph(kg, int(u), int(v), 2) for u, v in ends]
    ratio = edges_touched(subgraphs, 2) / full_graph_edges(kg, 2, len(subgraphs))
    assert ratio <= 0.2
