#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import logging
import math

import numpy as np
import pytest

from pydantic import ValidationError

from subgraph_ddi.errors import ConfigError, GraphFormatError, ShapeError, StageError
from subgraph_ddi.graph import EnclosingSubgraph, KnowledgeGraph, extract_enclosing_subgraph
from subgraph_ddi.model import (
    AttentionMask,
    FingerprintTable,
    ModelConfig,
    TransETrainer,
    build_node_features,
    compute_attention,
    count_kept_edges,
    forward,
    init_params,
    kept_edge_fraction,
    message_sum,
    propagate_layer,
    relation_matrix,
    run_model,
    transe_pretrain,
)
from subgraph_ddi.tensor import Tensor, finite_diff_check, matmul, relu
from subgraph_ddi.train import cross_entropy

TOY_CONFIG = ModelConfig(
    k=2, d=3, num_layers=2, num_bases=2, gamma=-1.0, dropout_p=0.0, num_ddi_relations=3, fingerprint_bits=4
)


@pytest.fixture
def subgraph(toy):
    return extract_enclosing_subgraph(toy, 0, 1, 2)


@pytest.fixture
def params(toy):
    return init_params(TOY_CONFIG, toy.num_entities, toy.num_relations, seed=0)


@pytest.fixture
def fingerprints():
    return FingerprintTable(4, {0: [1, 0, 1, 0], 1: [0, 1, 1, 0]})


def _features(subgraph, params, config=TOY_CONFIG) -> Tensor:
    return build_node_features(subgraph, params['entity_embed'], config.k)


def test_model_config_bounds():
    assert ModelConfig().input_width == 32 + 6
    with pytest.raises(ValidationError):
        ModelConfig(gamma=1.0)
    with pytest.raises(ValidationError):
        ModelConfig(d=0)
    with pytest.raises(ValidationError):
        ModelConfig(unknown=1)


def test_init_params_shapes(params):
    shapes = params.shapes()
    assert shapes['entity_embed'] == (8, 3)
    assert shapes['attn_WI'] == (9, 9)
    assert shapes['rel_attn_embed'] == (2, 9)
    assert shapes['layer0.basis'] == (9, 6)
    assert shapes['layer0.coeffs'] == (2, 2)
    assert shapes['layer0.W_self'] == (9, 3)
    assert shapes['layer1.basis'] == (3, 6)
    assert shapes['layer1.W_self'] == (3, 3)
    assert shapes['W_sub'] == (3, 3)
    assert shapes['W_pred'] == (TOY_CONFIG.pair_width, 3)
    assert TOY_CONFIG.pair_width == 2 * (2 * 3 + 4) + 2 * 3


def test_init_params_glorot_and_seeded(toy, params):
    bound = math.sqrt(6.0 / (8 + 3))
    assert np.abs(params['entity_embed']).max() <= bound
    assert params.equals(init_params(TOY_CONFIG, toy.num_entities, toy.num_relations, seed=0))
    assert not params.equals(init_params(TOY_CONFIG, toy.num_entities, toy.num_relations, seed=1))


def test_init_params_errors(toy):
    with pytest.raises(ConfigError):
        init_params(TOY_CONFIG.model_copy(update={'num_ddi_relations': None}), 8, 2)
    with pytest.raises(ConfigError, match='num_bases'):
        init_params(TOY_CONFIG.model_copy(update={'num_bases': 3}), 8, 2)
    with pytest.raises(ShapeError):
        init_params(TOY_CONFIG, 8, 2, entity_embed=np.zeros((8, 4)))


def test_init_params_layer_dependent_attention(toy):
    config = TOY_CONFIG.model_copy(update={'layer_independent_attention': False})
    params = init_params(config, toy.num_entities, toy.num_relations)
    assert params.shapes()['layer1.attn_WI'] == (3, 3)
    assert params.shapes()['layer1.rel_attn_embed'] == (2, 3)
    assert 'layer0.attn_WI' not in params


def test_node_features(subgraph, params):
    features = _features(subgraph, params)
    assert features.shape == (5, 9)
    assert features.data[0, 3:].tolist() == [1, 0, 0, 0, 0, 1]
    assert features.data[2, 3:].tolist() == [0, 1, 0, 0, 1, 0]
    assert np.array_equal(features.data[:, :3], params['entity_embed'][subgraph.global_nodes])


def test_node_features_reject_far_nodes(subgraph, params):
    with pytest.raises(ShapeError):
        build_node_features(subgraph, params['entity_embed'], 1)


def test_attention_gamma_extremes(subgraph, params):
    features = _features(subgraph, params)
    keep_all = compute_attention(subgraph, features, params, -1.0)
    assert keep_all.kept.all()
    assert np.array_equal(keep_all.values, keep_all.raw)
    prune_all = compute_attention(subgraph, features, params, 1.0)
    assert prune_all.pruned.all()
    assert not prune_all.values.any()


def test_attention_zero_weights_prune_everything(subgraph, params):
    weights = params.leaves(requires_grad=False)
    for name in ('attn_WI', 'attn_WJ', 'rel_attn_embed'):
        weights[name] = Tensor(np.zeros(params[name].shape))
    mask = compute_attention(subgraph, _features(subgraph, params), weights, 0.0)
    assert not mask.raw.any()
    assert mask.pruned.all()


def test_attention_nested_under_gamma(subgraph, params):
    features = _features(subgraph, params)
    previous = None
    for gamma in (-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 0.99):
        mask = compute_attention(subgraph, features, params, gamma)
        assert np.array_equal(mask.kept, mask.raw > gamma)
        assert np.array_equal(mask.values[mask.kept], mask.raw[mask.kept])
        assert not mask.values[mask.pruned].any()
        if previous is not None:
            assert not (mask.kept & ~previous).any()
        previous = mask.kept


def test_relation_matrix(params):
    basis, coeffs = params['layer0.basis'], params['layer0.coeffs']
    expected = sum(coeffs[1, b] * basis[:, 3 * b : 3 * (b + 1)] for b in range(2))
    assert np.allclose(relation_matrix(params, 0, 1), expected, rtol=0, atol=1e-12)
    with pytest.raises(ShapeError):
        relation_matrix(params, 0, 5)


def _loop_messages(subgraph, states, alpha, params, layer, edges):
    out = np.zeros((states.shape[0], 3))
    for e in edges:
        i, r, j = subgraph.local_edges[e]
        out[j] += alpha[e] * states[i] @ relation_matrix(params, layer, r)
    return out


def test_message_sum_matches_loop(subgraph, params):
    states = _features(subgraph, params)
    alpha = np.random.default_rng(0).uniform(size=(subgraph.num_edges, 1))
    out = message_sum(subgraph, states, Tensor(alpha), params, 0)
    expected = _loop_messages(subgraph, states.data, alpha[:, 0], params, 0, range(subgraph.num_edges))
    assert np.allclose(out.data, expected, rtol=0, atol=1e-12)
    subset = np.array([0, 3])
    out = message_sum(subgraph, states, Tensor(alpha), params, 0, edge_index=subset)
    expected = _loop_messages(subgraph, states.data, alpha[:, 0], params, 0, subset)
    assert np.allclose(out.data, expected, rtol=0, atol=1e-12)


def test_pruned_edges_send_nothing(subgraph, params):
    states = _features(subgraph, params)
    n = subgraph.num_edges
    mask = AttentionMask(
        alpha=Tensor(np.zeros((n, 1))), raw=np.zeros(n), kept=np.zeros(n, dtype=bool), gamma=0.5
    )
    out = propagate_layer(subgraph, states, mask, params, 0)
    expected = relu(matmul(states, Tensor(params['layer0.W_self'])))
    assert np.array_equal(out.data, expected.data)


def test_forward_shape_and_determinism(subgraph, params, fingerprints):
    first = forward(subgraph, params, TOY_CONFIG, fingerprints)
    second = forward(subgraph, params, TOY_CONFIG, fingerprints)
    assert first.shape == (1, 3)
    assert np.array_equal(first.data, second.data)


def test_forward_dropout_only_in_train_mode(subgraph, params, fingerprints):
    config = TOY_CONFIG.model_copy(update={'dropout_p': 0.5})
    infer = forward(subgraph, params, config, fingerprints, 'infer', np.random.default_rng(0))
    again = forward(subgraph, params, config, fingerprints, 'infer', np.random.default_rng(1))
    assert np.array_equal(infer.data, again.data)
    a = forward(subgraph, params, config, fingerprints, 'train', np.random.default_rng(0))
    b = forward(subgraph, params, config, fingerprints, 'train', np.random.default_rng(0))
    c = forward(subgraph, params, config, fingerprints, 'train', np.random.default_rng(1))
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_layer_independent_mask_is_shared(subgraph, params, fingerprints):
    result = run_model(subgraph, params, TOY_CONFIG, fingerprints)
    assert result.masks[0] is result.masks[1]
    assert len(result.states) == 2


def test_layer_dependent_masks(toy, subgraph, fingerprints):
    config = TOY_CONFIG.model_copy(update={'layer_independent_attention': False})
    params = init_params(config, toy.num_entities, toy.num_relations)
    result = run_model(subgraph, params, config, fingerprints)
    assert result.masks[0] is not result.masks[1]
    assert result.masks[1].raw.shape == (subgraph.num_edges,)


def test_no_summarization_has_no_masks(toy, subgraph, fingerprints):
    config = TOY_CONFIG.model_copy(update={'use_summarization': False})
    params = init_params(config, toy.num_entities, toy.num_relations)
    result = run_model(subgraph, params, config, fingerprints)
    assert result.masks == [None, None]
    assert count_kept_edges([subgraph], params, config) == (5, 5)


@pytest.mark.parametrize(
    ('update', 'width'),
    [
        ({}, 2 * (6 + 4) + 6),
        ({'use_fingerprint': False}, 2 * 6 + 6),
        ({'use_subgraph_feature': False}, 2 * (6 + 4)),
        ({'use_fingerprint': False, 'use_subgraph_feature': False}, 2 * 6),
    ],
)
def test_pair_width(toy, subgraph, fingerprints, update, width):
    config = TOY_CONFIG.model_copy(update=update)
    assert config.pair_width == width
    params = init_params(config, toy.num_entities, toy.num_relations)
    result = run_model(subgraph, params, config, fingerprints)
    assert result.pair.shape == (1, width)
    assert result.logits.shape == (1, 3)


def test_forward_rejects_other_k(toy, params):
    sub = extract_enclosing_subgraph(toy, 0, 1, 1)
    with pytest.raises(StageError, match=r'\[features\]'):
        forward(sub, params, TOY_CONFIG)


def test_forward_wraps_stage_errors(subgraph, params):
    wrong = FingerprintTable(5, {0: np.ones(5)})
    with pytest.raises(StageError, match=r'\[readout\]'):
        forward(subgraph, params, TOY_CONFIG, wrong)


def test_forward_gradient_check(subgraph, params, fingerprints):
    names = params.names()
    leaves = [Tensor(params[n].copy(), requires_grad=True) for n in names]

    def loss(values):
        logits = forward(subgraph, dict(zip(names, values)), TOY_CONFIG, fingerprints)
        return cross_entropy(logits, 1)

    assert finite_diff_check(loss, leaves) <= 1e-4


def test_forward_gradient_check_layer_dependent(toy, subgraph, fingerprints):
    config = TOY_CONFIG.model_copy(update={'layer_independent_attention': False, 'use_fingerprint': False})
    params = init_params(config, toy.num_entities, toy.num_relations, seed=4)
    names = params.names()
    leaves = [Tensor(params[n].copy(), requires_grad=True) for n in names]

    def loss(values):
        return cross_entropy(forward(subgraph, dict(zip(names, values)), config, fingerprints), 2)

    assert finite_diff_check(loss, leaves) <= 1e-4


def test_kept_edge_fraction(subgraph, params):
    assert kept_edge_fraction([subgraph], params, TOY_CONFIG) == 1.0
    assert kept_edge_fraction([], params, TOY_CONFIG) == 1.0
    kept, total = count_kept_edges([subgraph], params, TOY_CONFIG.model_copy(update={'gamma': 0.5}))
    assert total == 5 and 0 <= kept <= 5


def test_fingerprint_table_from_file(tmp_path, caplog):
    path = tmp_path / 'fp.tsv'
    path.write_text('Compound::D0\t1010\nCompound::Q\t0101\n', encoding='utf-8')
    with pytest.warns(UserWarning, match='outside the graph'):
        table = FingerprintTable.from_file(path, {'Compound::D0': 0, 'Compound::D1': 1}, 4)
    assert table.get(0).tolist() == [1, 0, 1, 0]
    with caplog.at_level(logging.WARNING, logger='subgraph_ddi.model'):
        assert table.get(1).tolist() == [0, 0, 0, 0]
        table.get(1)
    assert sum('No fingerprint for entity 1' in r.message for r in caplog.records) == 1


def test_fingerprint_table_rejects_bad_rows(tmp_path):
    path = tmp_path / 'fp.tsv'
    path.write_text('Compound::D0\t10a0\n', encoding='utf-8')
    with pytest.raises(GraphFormatError, match=':1:'):
        FingerprintTable.from_file(path, {'Compound::D0': 0}, 4)
    with pytest.raises(ShapeError):
        FingerprintTable(4, {0: [1, 0, 1]})


def test_transe_pretrain(toy):
    initial = transe_pretrain(toy, 3, epochs=0, seed=2)
    assert np.array_equal(initial, TransETrainer(toy, 3, seed=2).entity)
    trained = transe_pretrain(toy, 3, epochs=5, seed=2)
    assert trained.shape == (8, 3)
    assert np.allclose(np.linalg.norm(trained, axis=1), 1.0)


def test_transe_epoch_loss_is_non_negative(toy):
    trainer = TransETrainer(toy, 4, seed=0)
    assert trainer.run_epoch(batch_size=3) >= 0.0
    assert trainer.mean_distance() >= 0.0


def test_transe_distance_shrinks_on_single_triplet():
    kg = KnowledgeGraph.from_triplets([(0, 0, 1)], 2, 1)
    trainer = TransETrainer(kg, 16, seed=0)
    distances = [trainer.mean_distance()]
    for _ in range(10):
        trainer.run_epoch()
        distances.append(trainer.mean_distance())
    assert all(later <= earlier for earlier, later in zip(distances, distances[1:]))
    assert distances[-1] < distances[0]


def test_transe_pretrain_seeded(toy):
    first = transe_pretrain(toy, 4, epochs=5, seed=3)
    assert np.array_equal(first, transe_pretrain(toy, 4, epochs=5, seed=3))
    assert not np.array_equal(first, transe_pretrain(toy, 4, epochs=5, seed=4))


def _relabel(subgraph: EnclosingSubgraph, order: list[int]) -> EnclosingSubgraph:
    """Same subgraph with the non-center nodes listed in ``order`` and the edge rows reversed."""
    perm = np.array([0, 1, *order])
    position = np.empty_like(perm)
    position[perm] = np.arange(len(perm))
    edges = subgraph.local_edges[::-1]
    local_edges = np.stack([position[edges[:, 0]], edges[:, 1], position[edges[:, 2]]], axis=1)
    return EnclosingSubgraph(
        k=subgraph.k,
        global_nodes=subgraph.global_nodes[perm],
        dist_u=subgraph.dist_u[perm],
        dist_v=subgraph.dist_v[perm],
        local_edges=local_edges,
        edge_ids=subgraph.edge_ids[::-1],
        center=subgraph.center,
    )


@pytest.mark.parametrize('layer_independent', [True, False])
def test_forward_ignores_node_order(toy, subgraph, fingerprints, layer_independent):
    config = TOY_CONFIG.model_copy(update={'gamma': 0.0, 'layer_independent_attention': layer_independent})
    params = init_params(config, toy.num_entities, toy.num_relations, seed=5)
    expected = forward(subgraph, params, config, fingerprints).data
    for order in ([4, 3, 2], [3, 2, 4]):
        relabeled = _relabel(subgraph, order)
        assert relabeled.global_nodes[:2].tolist() == [0, 1]
        logits = forward(relabeled, params, config, fingerprints).data
        assert np.abs(logits - expected).max() <= 1e-12 * max(1.0, np.abs(expected).max())


def test_forward_ignores_edges_outside_subgraph(toy, subgraph, params, fingerprints):
    mutated = KnowledgeGraph.from_triplets(
        [*toy.triplets.tolist()[:-1], (6, 0, 7), (7, 1, 5)],
        toy.num_entities,
        toy.num_relations,
    )
    other = extract_enclosing_subgraph(mutated, 0, 1, 2)
    assert other.global_nodes.tolist() == subgraph.global_nodes.tolist()
    assert np.array_equal(other.local_edges, subgraph.local_edges)
    before = forward(subgraph, params, TOY_CONFIG, fingerprints).data
    after = forward(other, params, TOY_CONFIG, fingerprints).data
    assert np.array_equal(before, after)
