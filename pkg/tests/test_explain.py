#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import json

import numpy as np
import pytest

from pydantic import ValidationError

from subgraph_ddi.errors import GraphFormatError
from subgraph_ddi.explain import (
    PathwayEdge,
    PathwayGraph,
    PathwayNode,
    edge_shade,
    export_dot,
    export_json,
    load_json,
    merge_antiparallel,
    pathway_document,
    summarize_pathway,
    to_dot,
)
from subgraph_ddi.graph import extract_enclosing_subgraph
from subgraph_ddi.model import (
    AttentionMask,
    ModelConfig,
    build_node_features,
    compute_attention,
    init_params,
    run_model,
)
from subgraph_ddi.tensor import Tensor


def _mask(values, gamma):
    values = np.asarray(values, dtype=np.float64)
    kept = values > gamma
    return AttentionMask(alpha=Tensor((values * kept).reshape(-1, 1)), raw=values, kept=kept, gamma=gamma)


def _pathway(edges, directed=True, gamma=0.5):
    ids = sorted({e[0] for e in edges} | {e[1] for e in edges} | {0, 1})
    return PathwayGraph(
        nodes=[PathwayNode(id=i, name=f'e{i}', type='Gene', is_center=i < 2) for i in ids],
        edges=[PathwayEdge(source=s, target=t, relation=r, weight=w) for s, t, r, w in edges],
        gamma=gamma,
        directed=directed,
    )


@pytest.fixture
def subgraph(toy):
    return extract_enclosing_subgraph(toy, 0, 1, 2)


def test_summarize_drops_pruned_edges_and_orphans(toy, subgraph):
    mask = _mask([0.8, 0.6, 0.1, -0.3, 0.2], 0.5)
    pathway = summarize_pathway(subgraph, mask, toy)
    assert [n.id for n in pathway.nodes] == [0, 1, 2]
    assert [(e.source, e.target, e.relation) for e in pathway.edges] == [(0, 2, 'binds'), (2, 1, 'regulates')]
    assert [e.weight for e in pathway.edges] == pytest.approx([0.8, 0.6])
    assert pathway.centers == (0, 1)
    assert pathway.gamma == 0.5
    assert pathway.nodes[0].name == 'Compound::D0'
    assert pathway.nodes[2].type == 'Gene'


def test_summarize_everything_pruned_keeps_centers(toy, subgraph):
    pathway = summarize_pathway(subgraph, _mask([-0.5] * 5, 0.0), toy)
    assert [n.id for n in pathway.nodes] == [0, 1]
    assert pathway.edges == []


def test_summarize_without_mask(toy, subgraph):
    pathway = summarize_pathway(subgraph, None, toy)
    assert len(pathway.nodes) == subgraph.num_nodes
    assert len(pathway.edges) == subgraph.num_edges
    assert {e.weight for e in pathway.edges} == {1.0}
    assert pathway.gamma == -1.0


def test_summarize_mask_size_mismatch(toy, subgraph):
    with pytest.raises(ValueError, match='Mask covers'):
        summarize_pathway(subgraph, _mask([0.9, 0.9], 0.0), toy)


def test_summarize_model_mask(toy, subgraph):
    config = ModelConfig(k=2, d=3, num_bases=2, gamma=0.0, dropout_p=0.0, num_ddi_relations=2, fingerprint_bits=4)
    params = init_params(config, toy.num_entities, toy.num_relations, seed=1)
    mask = run_model(subgraph, params, config).masks[0]
    pathway = summarize_pathway(subgraph, mask, toy)
    assert len(pathway.edges) == int(mask.kept.sum())
    assert all(e.weight > 0.0 for e in pathway.edges)


def test_pathway_validation():
    with pytest.raises(ValidationError, match='two center nodes'):
        PathwayGraph(nodes=[PathwayNode(id=0, name='a', type='Gene', is_center=True)], edges=[])
    with pytest.raises(ValidationError, match='Zero-weight'):
        _pathway([(0, 1, 'r', 0.0)])
    with pytest.raises(ValidationError, match='unknown node'):
        PathwayGraph(
            nodes=[PathwayNode(id=i, name='a', type='Gene', is_center=True) for i in (0, 1)],
            edges=[PathwayEdge(source=0, target=9, relation='r', weight=0.7)],
        )
    with pytest.raises(ValidationError, match='Isolated'):
        PathwayGraph(
            nodes=[PathwayNode(id=i, name='a', type='Gene', is_center=i < 2) for i in (0, 1, 2)],
            edges=[],
        )


def test_merge_antiparallel():
    pathway = _pathway([(0, 2, 'binds', 0.6), (2, 0, 'inhibits', 0.9), (2, 1, 'binds', 0.7)])
    merged = merge_antiparallel(pathway)
    assert not merged.directed
    assert len(merged.edges) == 2
    first = merged.edges[0]
    assert (first.source, first.target, first.relation, first.weight) == (2, 0, 'binds | inhibits', 0.9)


def test_edge_shade():
    assert edge_shade(0.75, 0.5) == pytest.approx(0.5)
    assert edge_shade(1.0, -1.0) == 1.0
    assert edge_shade(-1.0, -1.0) == 0.0
    assert edge_shade(0.2, 0.5) == 0.0


def test_to_dot_styles():
    dot = to_dot(_pathway([(0, 2, 'binds', 1.0), (2, 1, 'regulates', 0.75)]))
    assert dot.get_type() == 'digraph'
    text = dot.to_string()
    assert text.count('doublecircle') == 2
    assert '->' in text
    assert '5.00' in text and 'gray0' in text
    assert '3.00' in text and 'gray45' in text


def test_to_dot_undirected():
    text = to_dot(merge_antiparallel(_pathway([(0, 1, 'binds', 0.9)]))).to_string()
    assert text.startswith('graph')
    assert '--' in text


def test_export_dot(tmp_path, toy, subgraph):
    pathway = summarize_pathway(subgraph, _mask([0.8, 0.6, 0.1, -0.3, 0.2], 0.5), toy)
    path = export_dot(pathway, tmp_path / 'out' / 'pathway.dot')
    text = path.read_text(encoding='utf-8')
    assert text.startswith('digraph')
    assert 'n0' in text and 'n2' in text and 'n3' not in text


def test_pathway_document_is_stable():
    pathway = _pathway([(0, 1, 'binds', 0.123456789)])
    doc = pathway_document(pathway)
    assert doc.endswith('\n')
    assert doc == pathway_document(pathway)
    data = json.loads(doc)
    assert list(data) == sorted(data)
    assert data['edges'][0]['weight'] == 0.123456789


def test_export_json_round_trip(tmp_path):
    pathway = _pathway([(0, 2, 'binds', 0.75), (2, 1, 'regulates', 0.5625)])
    path = export_json(pathway, tmp_path / 'pathway.json')
    assert load_json(path) == pathway


def test_export_json_round_trip_model_weights(tmp_path, toy, subgraph):
    config = ModelConfig(k=2, d=3, num_bases=2, gamma=-1.0, dropout_p=0.0, num_ddi_relations=2, fingerprint_bits=4)
    params = init_params(config, toy.num_entities, toy.num_relations, seed=4)
    pathway = summarize_pathway(subgraph, run_model(subgraph, params, config).masks[0], toy)
    assert pathway.edges
    path = export_json(pathway, tmp_path / 'pathway.json')
    loaded = load_json(path)
    assert loaded == pathway
    assert [e.weight for e in loaded.edges] == [e.weight for e in pathway.edges]


def test_export_json_keeps_tiny_weights(tmp_path):
    pathway = _pathway([(0, 1, 'binds', 3e-7), (0, 1, 'regulates', 0.7310585786300049)], gamma=0.0)
    loaded = load_json(export_json(pathway, tmp_path / 'pathway.json'))
    assert [e.weight for e in loaded.edges] == [3e-7, 0.7310585786300049]
    assert loaded == pathway


def test_load_json_errors(tmp_path):
    with pytest.raises(GraphFormatError, match='not found'):
        load_json(tmp_path / 'missing.json')
    bad = tmp_path / 'bad.json'
    bad.write_text('{"nodes": []}', encoding='utf-8')
    with pytest.raises(GraphFormatError, match='not a pathway'):
        load_json(bad)


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_raising_gamma_never_grows_pathway(toy, subgraph, seed):
    config = ModelConfig(k=2, d=3, num_bases=2, gamma=-1.0, dropout_p=0.0, num_ddi_relations=2, fingerprint_bits=4)
    params = init_params(config, toy.num_entities, toy.num_relations, seed=seed)
    features = build_node_features(subgraph, params['entity_embed'], config.k)
    previous = None
    for gamma in (-1.0, -0.5, -0.1, 0.0, 0.1, 0.3, 0.6, 0.9, 1.0):
        pathway = summarize_pathway(subgraph, compute_attention(subgraph, features, params, gamma), toy)
        nodes = {n.id for n in pathway.nodes}
        edges = {(e.source, e.target, e.relation) for e in pathway.edges}
        if previous is not None:
            assert nodes <= previous[0]
            assert edges <= previous[1]
        previous = nodes, edges
    assert previous == ({0, 1}, set())
