#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import logging
import time

from typing import Sequence

import numpy as np
import pandas as pd

from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from subgraph_ddi.errors import ConfigError
from subgraph_ddi.graph import EnclosingSubgraph, KnowledgeGraph, bfs_distances, pair_subgraph
from subgraph_ddi.model import FingerprintTable, ModelConfig, forward, init_params

log = logging.getLogger(__name__)


class BenchConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    k_values: tuple[int, ...] = (1, 2)
    full_graph: bool = False
    sample_pairs: int = Field(3, ge=1)
    seed: int = Field(0, ge=0)
    progress: bool = False


def edges_touched(subgraphs: Sequence[EnclosingSubgraph], num_layers: int) -> int:
    """Edge visits of one epoch of subgraph propagation: ``Σ |local_edges| * L``."""
    return sum(s.num_edges for s in subgraphs) * num_layers


def full_graph_edges(graph: KnowledgeGraph, num_layers: int, num_pairs: int) -> int:
    """Edge visits of one epoch when every example propagates over the whole graph."""
    return graph.num_triplets * num_layers * num_pairs


def full_graph_view(graph: KnowledgeGraph, u: int, v: int, k: int) -> EnclosingSubgraph:
    """The whole graph laid out like an enclosing subgraph of ``(u, v)``, distances clamped to ``k``."""
    rest = np.setdiff1d(np.arange(graph.num_entities), [u, v])
    nodes = np.concatenate([[u, v], rest]).astype(np.int64)
    local = np.empty(graph.num_entities, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    du = bfs_distances(graph, u, k)
    dv = bfs_distances(graph, v, k)
    triplets = graph.triplets
    return EnclosingSubgraph(
        k=k,
        global_nodes=nodes,
        dist_u=np.array([du.get(int(n), k) for n in nodes], dtype=np.int64),
        dist_v=np.array([dv.get(int(n), k) for n in nodes], dtype=np.int64),
        local_edges=np.stack([local[triplets[:, 0]], triplets[:, 1], local[triplets[:, 2]]], axis=1),
        edge_ids=np.arange(graph.num_triplets),
        center=(u, v),
    )


def run_bench(
    graph: KnowledgeGraph,
    pairs: Sequence[tuple[int, int]],
    config: ModelConfig,
    bench: BenchConfig = BenchConfig(),
    fingerprints: FingerprintTable | None = None,
) -> pd.DataFrame:
    """
    Count edge visits and time one epoch-equivalent of forward passes for each hop budget. With
    ``full_graph``, a few pairs are propagated over the entire graph and the epoch time is extrapolated.

    :param graph: Propagation graph.
    :param pairs: Train pairs of one epoch.
    :param config: Model architecture; ``k`` is replaced by each value of ``bench.k_values``.
    :param bench: Benchmark settings.
    :param fingerprints: Drug fingerprints.
    :return: Columns ``k,mode,edges_touched_per_epoch,wall_time,extrapolated``.
    """
    if not pairs:
        raise ConfigError('Benchmark needs at least one pair')
    if config.num_ddi_relations is None:
        raise ConfigError('model.num_ddi_relations is not set')
    rows = []
    for k in bench.k_values:
        cfg = config.model_copy(update={'k': k})
        params = init_params(cfg, graph.num_entities, graph.num_relations, seed=bench.seed)
        start = time.perf_counter()
        subgraphs = []
        for u, v in tqdm(pairs, desc=f'k={k}', disable=not bench.progress, leave=False):
            subgraph = pair_subgraph(graph, u, v, k)
            forward(subgraph, params, cfg, fingerprints)
            subgraphs.append(subgraph)
        elapsed = time.perf_counter() - start
        touched = edges_touched(subgraphs, cfg.num_layers)
        rows.append((k, 'subgraph', touched, elapsed, False))
        log.info('k=%d: %d edge visits per epoch, %.3fs', k, touched, elapsed)
        if bench.full_graph:
            sample = list(pairs[: bench.sample_pairs])
            start = time.perf_counter()
            for u, v in sample:
                forward(full_graph_view(graph, u, v, k), params, cfg, fingerprints)
            estimate = (time.perf_counter() - start) / len(sample) * len(pairs)
            full = full_graph_edges(graph, cfg.num_layers, len(pairs))
            rows.append((k, 'full-graph', full, estimate, True))
            log.info('k=%d: subgraph propagation touches %.2f%% of the full-graph edges', k, 100.0 * touched / full)
    return pd.DataFrame(rows, columns=['k', 'mode', 'edges_touched_per_epoch', 'wall_time', 'extrapolated'])
