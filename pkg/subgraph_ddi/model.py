#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import logging
import math
import warnings

from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from pydantic import BaseModel, ConfigDict, Field

from subgraph_ddi.errors import ConfigError, GraphFormatError, ShapeError, StageError, SubgraphDDIException
from subgraph_ddi.graph import EnclosingSubgraph, KnowledgeGraph
from subgraph_ddi.tensor import (
    Tensor,
    add,
    concat,
    dropout,
    gather_rows,
    matmul,
    mean_rows,
    mul,
    relu,
    scale,
    scatter_add_rows,
    tanh,
)
from subgraph_ddi.types import Mode

log = logging.getLogger(__name__)


class ModelConfig(BaseModel):
    """Architecture hyperparameters and ablation switches."""

    model_config = ConfigDict(extra='forbid', frozen=True)

    k: int = Field(2, ge=1)
    d: int = Field(32, ge=1)
    num_layers: int = Field(2, ge=1)
    num_bases: int = Field(8, ge=1)
    gamma: float = Field(0.0, ge=-1.0, lt=1.0)
    dropout_p: float = Field(0.3, ge=0.0, lt=1.0)
    num_ddi_relations: int | None = Field(None, ge=1)
    fingerprint_bits: int = Field(1024, ge=1)
    use_kg: bool = True
    use_summarization: bool = True
    use_subgraph_feature: bool = True
    use_fingerprint: bool = True
    layer_independent_attention: bool = True
    transe_epochs: int = Field(20, ge=0)
    transe_margin: float = Field(1.0, gt=0.0)
    transe_lr: float = Field(0.01, gt=0.0)

    @property
    def input_width(self) -> int:
        """Width of the layer-0 node features: embedding plus two position one-hots."""
        return self.d + 2 * (self.k + 1)

    @property
    def pair_width(self) -> int:
        node = self.num_layers * self.d + self.fingerprint_bits * int(self.use_fingerprint)
        return 2 * node + self.num_layers * self.d * int(self.use_subgraph_feature)


class ModelParams:
    """Named float64 arrays holding every learnable weight."""

    def __init__(self, tensors: Mapping[str, np.ndarray]) -> None:
        self.tensors = {name: np.ascontiguousarray(value, dtype=np.float64) for name, value in tensors.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self) -> list[str]:
        return list(self.tensors)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: value.shape for name, value in self.tensors.items()}

    def copy(self) -> 'ModelParams':
        return ModelParams({name: value.copy() for name, value in self.tensors.items()})

    def leaves(self, requires_grad: bool = True) -> dict[str, Tensor]:
        """Tensors sharing this object's buffers, one independent set per forward pass."""
        return {name: Tensor(value, requires_grad=requires_grad, name=name) for name, value in self.tensors.items()}

    def equals(self, other: 'ModelParams') -> bool:
        return self.names() == other.names() and all(
            np.array_equal(self.tensors[n], other.tensors[n]) for n in self.names()
        )


class FingerprintTable:
    """Per-drug 0/1 vectors; drugs without a fingerprint read as all zeros."""

    def __init__(self, bits: int, vectors: Mapping[int, np.ndarray] | None = None) -> None:
        self.bits = bits
        self.vectors: dict[int, np.ndarray] = {}
        self._warned: set[int] = set()
        for entity, vec in (vectors or {}).items():
            vec = np.asarray(vec, dtype=np.float64).reshape(-1)
            if vec.shape[0] != bits or not np.isin(vec, (0.0, 1.0)).all():
                raise ShapeError(f'Fingerprint of entity {entity} must be {bits} bits of 0/1')
            self.vectors[int(entity)] = vec

    @classmethod
    def from_file(cls, path: str | Path, entity_index: Mapping[str, int], bits: int) -> 'FingerprintTable':
        """
        Read ``drug_id<TAB>bitstring`` lines.

        :param path: Fingerprint file.
        :param entity_index: Entity name to id map of the propagation graph.
        :param bits: Expected bitstring length.
        :return:
        """
        path = Path(path)
        if not path.is_file():
            raise GraphFormatError(f'File not found: {path}')
        vectors = {}
        unknown = 0
        with path.open(encoding='utf-8') as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or line.startswith('#'):
                    continue
                fields = line.split('\t') if '\t' in line else line.split()
                if len(fields) != 2:
                    raise GraphFormatError(f'{path}:{lineno}: expected drug id and bitstring')
                name, bitstring = fields
                if len(bitstring) != bits or set(bitstring) - {'0', '1'}:
                    raise GraphFormatError(f'{path}:{lineno}: bitstring must be exactly {bits} characters of 0/1')
                if name not in entity_index:
                    unknown += 1
                    continue
                vectors[entity_index[name]] = np.frombuffer(bitstring.encode('ascii'), dtype=np.uint8) - ord('0')
        if unknown:
            warnings.warn(f'{unknown} fingerprints in {path} belong to drugs outside the graph', UserWarning)
        return cls(bits, vectors)

    def get(self, entity: int) -> np.ndarray:
        vec = self.vectors.get(entity)
        if vec is None:
            if entity not in self._warned:
                self._warned.add(entity)
                log.warning('No fingerprint for entity %d, using the all-zero vector', entity)
            return np.zeros(self.bits)
        return vec


@dataclass
class AttentionMask:
    """Edge scores after thresholding: ``alpha`` is ``raw`` where kept and exactly 0 where pruned."""

    alpha: Tensor
    raw: np.ndarray
    kept: np.ndarray
    gamma: float

    @property
    def pruned(self) -> np.ndarray:
        return ~self.kept

    @property
    def values(self) -> np.ndarray:
        return self.alpha.data.reshape(-1)


@dataclass
class ForwardResult:
    logits: Tensor
    features: Tensor
    states: list[Tensor]
    masks: list[AttentionMask | None]
    pair: Tensor


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def attention_names(layer: int, config: ModelConfig) -> tuple[str, str, str]:
    if layer == 0 or config.layer_independent_attention:
        return 'attn_WI', 'attn_WJ', 'rel_attn_embed'
    return f'layer{layer}.attn_WI', f'layer{layer}.attn_WJ', f'layer{layer}.rel_attn_embed'


def init_params(
    config: ModelConfig,
    num_entities: int,
    num_relations: int,
    seed: int = 0,
    entity_embed: np.ndarray | None = None,
) -> ModelParams:
    """
    Glorot-uniform initialisation of every weight, deterministic given ``seed``.

    :param config: Architecture; ``num_ddi_relations`` must be set.
    :param num_entities: Rows of the entity table.
    :param num_relations: Relation types of the propagation graph.
    :param seed: Random seed.
    :param entity_embed: Optional pretrained ``num_entities x d`` table (e.g. from TransE).
    :return:
    """
    if num_entities < 1 or num_relations < 1:
        raise ConfigError('init_params needs at least one entity and one relation')
    if config.num_ddi_relations is None:
        raise ConfigError('model.num_ddi_relations is not set')
    if config.num_bases > num_relations:
        raise ConfigError(f'num_bases ({config.num_bases}) exceeds the number of relations ({num_relations})')
    rng = np.random.default_rng(seed)
    d, d0, b = config.d, config.input_width, config.num_bases
    tensors = {
        'entity_embed': _glorot(rng, num_entities, d),
        'attn_WI': _glorot(rng, d0, d0),
        'attn_WJ': _glorot(rng, d0, d0),
        'rel_attn_embed': _glorot(rng, num_relations, d0),
    }
    for layer in range(config.num_layers):
        din = d0 if layer == 0 else d
        tensors[f'layer{layer}.basis'] = np.hstack([_glorot(rng, din, d) for _ in range(b)])
        tensors[f'layer{layer}.coeffs'] = _glorot(rng, num_relations, b)
        tensors[f'layer{layer}.W_self'] = _glorot(rng, din, d)
        if layer > 0 and not config.layer_independent_attention:
            wi, wj, rel = attention_names(layer, config)
            tensors[wi] = _glorot(rng, din, din)
            tensors[wj] = _glorot(rng, din, din)
            tensors[rel] = _glorot(rng, num_relations, din)
    tensors['W_sub'] = _glorot(rng, d, d)
    tensors['W_pred'] = _glorot(rng, config.pair_width, config.num_ddi_relations)
    if entity_embed is not None:
        if entity_embed.shape != (num_entities, d):
            raise ShapeError(f'Pretrained embedding {entity_embed.shape} does not match ({num_entities}, {d})')
        tensors['entity_embed'] = entity_embed.copy()
    return ModelParams(tensors)


class TransETrainer:
    """
    Margin-ranking TransE over the graph's triplets with L2-normalised entity vectors and one corrupted
    head or tail per triplet.
    """

    def __init__(self, kg: KnowledgeGraph, d: int, margin: float = 1.0, lr: float = 0.01, seed: int = 0) -> None:
        if not kg.num_triplets:
            raise ConfigError('TransE needs a non-empty graph')
        self.kg = kg
        self.margin = margin
        self.lr = lr
        self.rng = np.random.default_rng(seed)
        self.entity = _glorot(self.rng, kg.num_entities, d)
        self.relation = _glorot(self.rng, kg.num_relations, d)
        self.relation /= np.maximum(np.linalg.norm(self.relation, axis=1, keepdims=True), 1e-12)

    def normalized_entities(self) -> np.ndarray:
        return self.entity / np.maximum(np.linalg.norm(self.entity, axis=1, keepdims=True), 1e-12)

    def mean_distance(self) -> float:
        ent = self.normalized_entities()
        h, r, t = self.kg.triplets.T
        return float(np.linalg.norm(ent[h] + self.relation[r] - ent[t], axis=1).mean())

    def _corrupt(self, entities: np.ndarray) -> np.ndarray:
        draw = self.rng.integers(self.kg.num_entities - 1, size=len(entities))
        return draw + (draw >= entities)

    def run_epoch(self, batch_size: int = 1024) -> float:
        self.entity = self.normalized_entities()
        triplets = self.kg.triplets[self.rng.permutation(self.kg.num_triplets)]
        total = 0.0
        for start in range(0, len(triplets), batch_size):
            h, r, t = triplets[start : start + batch_size].T
            corrupt_head = self.rng.random(len(h)) < 0.5
            replacement = self._corrupt(np.where(corrupt_head, h, t))
            nh = np.where(corrupt_head, replacement, h)
            nt = np.where(corrupt_head, t, replacement)
            pos = self.entity[h] + self.relation[r] - self.entity[t]
            neg = self.entity[nh] + self.relation[r] - self.entity[nt]
            dp = np.linalg.norm(pos, axis=1, keepdims=True)
            dn = np.linalg.norm(neg, axis=1, keepdims=True)
            hinge = self.margin + dp - dn
            active = (hinge > 0).reshape(-1)
            total += float(hinge[active].sum())
            if not active.any():
                continue
            gp = (pos / np.maximum(dp, 1e-12))[active]
            gn = (neg / np.maximum(dn, 1e-12))[active]
            grad_entity = np.zeros_like(self.entity)
            grad_relation = np.zeros_like(self.relation)
            np.add.at(grad_entity, h[active], gp)
            np.add.at(grad_entity, t[active], -gp)
            np.add.at(grad_entity, nh[active], -gn)
            np.add.at(grad_entity, nt[active], gn)
            np.add.at(grad_relation, r[active], gp - gn)
            self.entity -= self.lr * grad_entity
            self.relation -= self.lr * grad_relation
        return total


def transe_pretrain(
    kg: KnowledgeGraph,
    d: int,
    epochs: int,
    margin: float = 1.0,
    lr: float = 0.01,
    seed: int = 0,
) -> np.ndarray:
    """
    Entity vectors from TransE; with ``epochs=0`` the random initialisation is returned unchanged.

    :return: ``num_entities x d`` matrix.
    """
    trainer = TransETrainer(kg, d, margin=margin, lr=lr, seed=seed)
    if epochs == 0:
        return trainer.entity
    for epoch in range(epochs):
        loss = trainer.run_epoch()
        log.debug('TransE epoch %d: hinge %.6f', epoch, loss)
    return trainer.normalized_entities()


def _as_weights(params: ModelParams | Mapping[str, Tensor]) -> Mapping[str, Tensor]:
    return params.leaves(requires_grad=False) if isinstance(params, ModelParams) else params


def build_node_features(subgraph: EnclosingSubgraph, entity_embed: Tensor | np.ndarray, k: int) -> Tensor:
    """
    Layer-0 node features ``embedding ⊕ one-hot(dist_u) ⊕ one-hot(dist_v)``, width ``d + 2(k + 1)``.

    :param subgraph: Extracted subgraph with distances clamped to ``[0, k]``.
    :param entity_embed: Full entity table.
    :param k: Hop budget fixing the one-hot width.
    :return:
    """
    if not isinstance(entity_embed, Tensor):
        entity_embed = Tensor(entity_embed)
    if subgraph.dist_u.max(initial=0) > k or subgraph.dist_v.max(initial=0) > k:
        raise ShapeError(f'Subgraph distances exceed k={k}; extract with the same hop budget')
    n = subgraph.num_nodes
    position = np.zeros((n, 2 * (k + 1)))
    position[np.arange(n), subgraph.dist_u] = 1.0
    position[np.arange(n), k + 1 + subgraph.dist_v] = 1.0
    return concat([gather_rows(entity_embed, subgraph.global_nodes), Tensor(position)], axis=1)


def compute_attention(
    subgraph: EnclosingSubgraph,
    features: Tensor,
    params: ModelParams | Mapping[str, Tensor],
    gamma: float,
    names: tuple[str, str, str] = ('attn_WI', 'attn_WJ', 'rel_attn_embed'),
) -> AttentionMask:
    """
    Edge intensity ``tanh((h_j W^J)(h_i W^I + r_ij)^T / sqrt(width))``, zeroed unless strictly above ``gamma``.

    :param subgraph: Subgraph whose local edges ``(i, r, j)`` are scored.
    :param features: Node states the scores are computed from (layer 0 for layer-independent attention).
    :param params: Weights holding ``names``.
    :param gamma: Pruning threshold.
    :param names: Parameter names of ``W^I``, ``W^J`` and the relation table.
    :return:
    """
    weights = _as_weights(params)
    wi, wj, rel = (weights[n] for n in names)
    width = features.shape[1]
    if wi.shape != (width, width) or wj.shape != (width, width) or rel.shape[1] != width:
        raise ShapeError(f'Attention weights {wi.shape}/{wj.shape}/{rel.shape} do not fit features {features.shape}')
    edges = subgraph.local_edges
    src, rels, dst = edges[:, 0], edges[:, 1], edges[:, 2]
    query = add(gather_rows(matmul(features, wi), src), gather_rows(rel, rels))
    key = gather_rows(matmul(features, wj), dst)
    raw = tanh(scale(matmul(mul(key, query), Tensor(np.ones((width, 1)))), 1.0 / math.sqrt(width)))
    kept = raw.data.reshape(-1) > gamma
    alpha = mul(raw, Tensor(kept.astype(np.float64).reshape(-1, 1)))
    return AttentionMask(alpha=alpha, raw=raw.data.reshape(-1).copy(), kept=kept, gamma=gamma)


def relation_matrix(params: ModelParams | Mapping[str, Tensor], layer: int, r: int) -> np.ndarray:
    """``W_r = Σ_b a_rb V_b`` for one layer."""
    weights = _as_weights(params)
    basis = weights[f'layer{layer}.basis'].data
    coeffs = weights[f'layer{layer}.coeffs'].data
    if not 0 <= r < coeffs.shape[0]:
        raise ShapeError(f'Relation {r} outside the {coeffs.shape[0]} relation coefficients')
    num_bases = coeffs.shape[1]
    blocks = basis.reshape(basis.shape[0], num_bases, -1)
    return np.einsum('b,ibd->id', coeffs[r], blocks)


def message_sum(
    subgraph: EnclosingSubgraph,
    states: Tensor,
    alpha: Tensor | None,
    params: ModelParams | Mapping[str, Tensor],
    layer: int,
    edge_index: np.ndarray | None = None,
) -> Tensor:
    """
    Relation-aware messages ``b_v = Σ_(u,r,v) α_uv · h_u W_r`` gathered at each edge's tail.

    :param subgraph: Source of the local edges.
    :param states: Node states ``H`` entering the layer.
    :param alpha: ``(E, 1)`` edge weights, or `None` for unit weights.
    :param params: Weights holding the layer's basis and coefficients.
    :param layer: Layer index.
    :param edge_index: Subset of local edge rows to use (e.g. the unpruned ones).
    :return: ``(n, d)`` message sums.
    """
    weights = _as_weights(params)
    basis = weights[f'layer{layer}.basis']
    coeffs = weights[f'layer{layer}.coeffs']
    if basis.shape[0] != states.shape[1]:
        raise ShapeError(f'Layer {layer} basis {basis.shape} does not fit states {states.shape}')
    num_bases = coeffs.shape[1]
    d = basis.shape[1] // num_bases
    edges = subgraph.local_edges if edge_index is None else subgraph.local_edges[edge_index]
    zeros = Tensor(np.zeros((states.shape[0], d)))
    if not len(edges):
        return zeros
    if alpha is not None and edge_index is not None:
        alpha = gather_rows(alpha, edge_index)
    src, rels, dst = edges[:, 0], edges[:, 1], edges[:, 2]
    projected = gather_rows(matmul(states, basis), src)
    spread = Tensor(np.kron(np.eye(num_bases), np.ones((1, d))))
    fold = Tensor(np.tile(np.eye(d), (num_bases, 1)))
    messages = matmul(mul(projected, matmul(gather_rows(coeffs, rels), spread)), fold)
    if alpha is not None:
        messages = mul(messages, alpha)
    return scatter_add_rows(zeros, dst, messages)


def propagate_layer(
    subgraph: EnclosingSubgraph,
    states: Tensor,
    mask: AttentionMask | None,
    params: ModelParams | Mapping[str, Tensor],
    layer: int,
    dropout_p: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Tensor:
    """
    One propagation step ``dropout(ReLU(H W_self + b))``; pruned edges contribute nothing.

    :param subgraph: Subgraph being propagated over.
    :param states: ``H^(l)``.
    :param mask: Attention mask, or `None` for unweighted propagation.
    :param params: Model weights.
    :param layer: Layer index.
    :param dropout_p: Dropout probability.
    :param rng: Dropout stream.
    :param training: Dropout is applied only in training mode.
    :return: ``H^(l+1)``.
    """
    weights = _as_weights(params)
    w_self = weights[f'layer{layer}.W_self']
    if w_self.shape[0] != states.shape[1]:
        raise ShapeError(f'Layer {layer} W_self {w_self.shape} does not fit states {states.shape}')
    if mask is None:
        messages = message_sum(subgraph, states, None, weights, layer)
    else:
        messages = message_sum(subgraph, states, mask.alpha, weights, layer, edge_index=np.flatnonzero(mask.kept))
    hidden = relu(add(matmul(states, w_self), messages))
    return dropout(hidden, dropout_p, rng, training=training)


def readout_subgraph(states: list[Tensor], params: ModelParams | Mapping[str, Tensor]) -> Tensor:
    """Layer-aggregated subgraph embedding ``[mean(H^1 W_sub), ..., mean(H^L W_sub)]``."""
    w_sub = _as_weights(params)['W_sub']
    return concat([mean_rows(matmul(h, w_sub)) for h in states], axis=1)


def pair_representation(
    states: list[Tensor],
    fingerprints: tuple[np.ndarray, np.ndarray] | None,
    config: ModelConfig,
    readout: Tensor | None = None,
) -> Tensor:
    """
    ``[h_u, h_v, h_Gsub]`` where ``h_x`` concatenates the center's states across layers, followed by its
    fingerprint when that channel is enabled.

    :param states: ``H^1..H^L``.
    :param fingerprints: ``(f_u, f_v)`` bit vectors.
    :param config: Channel switches.
    :param readout: Subgraph embedding, required when the subgraph channel is on.
    :return:
    """
    centers = []
    for local in (0, 1):
        blocks = [gather_rows(h, [local]) for h in states]
        if config.use_fingerprint:
            if fingerprints is None:
                raise ShapeError('Fingerprint channel enabled but no fingerprints were given')
            fp = np.asarray(fingerprints[local], dtype=np.float64).reshape(1, -1)
            if fp.shape[1] != config.fingerprint_bits:
                raise ShapeError(f'Fingerprint width {fp.shape[1]} does not match {config.fingerprint_bits} bits')
            blocks.append(Tensor(fp))
        centers.append(concat(blocks, axis=1))
    if config.use_subgraph_feature:
        if readout is None:
            raise ShapeError('Subgraph channel enabled but no readout was given')
        centers.append(readout)
    return concat(centers, axis=1)


def decode(pair: Tensor, params: ModelParams | Mapping[str, Tensor]) -> Tensor:
    """Linear decoder to one logit per DDI relation; no bias."""
    return matmul(pair, _as_weights(params)['W_pred'])


@contextmanager
def _stage(name: str) -> Iterator[None]:
    try:
        yield
    except StageError:
        raise
    except SubgraphDDIException as e:
        raise StageError(str(e), name) from e


def run_model(
    subgraph: EnclosingSubgraph,
    params: ModelParams | Mapping[str, Tensor],
    config: ModelConfig,
    fingerprints: FingerprintTable | None = None,
    mode: Mode | str = Mode.infer,
    rng: np.random.Generator | None = None,
) -> ForwardResult:
    """
    Full pipeline with intermediate states and attention masks kept for inspection.

    :param subgraph: Subgraph extracted with ``config.k``.
    :param params: Weights, either plain arrays or differentiable leaves.
    :param config: Architecture and ablation switches.
    :param fingerprints: Drug fingerprints, needed when the fingerprint channel is on.
    :param mode: ``train`` enables dropout.
    :param rng: Dropout stream for train mode.
    :return:
    """
    mode = Mode(mode)
    training = mode is Mode.train and config.dropout_p > 0
    if subgraph.k != config.k:
        raise StageError(f'Subgraph extracted with k={subgraph.k}, model expects k={config.k}', 'features')
    weights = _as_weights(params)
    with _stage('features'):
        features = build_node_features(subgraph, weights['entity_embed'], config.k)
        if features.shape[1] != weights['attn_WI'].shape[0]:
            raise ShapeError(f'Node feature width {features.shape[1]} does not match attention input')
    states: list[Tensor] = []
    masks: list[AttentionMask | None] = []
    current = features
    shared_mask = None
    for layer in range(config.num_layers):
        with _stage(f'attention[{layer}]'):
            if not config.use_summarization:
                mask = None
            elif config.layer_independent_attention:
                if shared_mask is None:
                    shared_mask = compute_attention(subgraph, features, weights, config.gamma)
                mask = shared_mask
            else:
                mask = compute_attention(subgraph, current, weights, config.gamma, attention_names(layer, config))
        with _stage(f'propagate[{layer}]'):
            current = propagate_layer(subgraph, current, mask, weights, layer, config.dropout_p, rng, training)
        states.append(current)
        masks.append(mask)
    with _stage('readout'):
        readout = readout_subgraph(states, weights) if config.use_subgraph_feature else None
        fps = None
        if config.use_fingerprint:
            if fingerprints is None:
                fps = (np.zeros(config.fingerprint_bits), np.zeros(config.fingerprint_bits))
            else:
                fps = (fingerprints.get(subgraph.center[0]), fingerprints.get(subgraph.center[1]))
        pair = pair_representation(states, fps, config, readout)
    with _stage('decode'):
        logits = decode(pair, weights)
    return ForwardResult(logits=logits, features=features, states=states, masks=masks, pair=pair)


def forward(
    subgraph: EnclosingSubgraph,
    params: ModelParams | Mapping[str, Tensor],
    config: ModelConfig,
    fingerprints: FingerprintTable | None = None,
    mode: Mode | str = Mode.infer,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Logits ``(1, R)`` for the subgraph's center pair; see :func:`run_model`."""
    return run_model(subgraph, params, config, fingerprints, mode, rng).logits


def count_kept_edges(
    subgraphs: list[EnclosingSubgraph],
    params: ModelParams | Mapping[str, Tensor],
    config: ModelConfig,
) -> tuple[int, int]:
    """
    Edges surviving the layer-0 attention threshold across ``subgraphs``.

    :return: ``(kept, total)``; every edge counts as kept when summarization is off.
    """
    weights = _as_weights(params)
    kept = total = 0
    for subgraph in subgraphs:
        total += subgraph.num_edges
        if not config.use_summarization:
            kept += subgraph.num_edges
            continue
        features = build_node_features(subgraph, weights['entity_embed'], config.k)
        kept += int(compute_attention(subgraph, features, weights, config.gamma).kept.sum())
    return kept, total


def kept_edge_fraction(
    subgraphs: list[EnclosingSubgraph],
    params: ModelParams | Mapping[str, Tensor],
    config: ModelConfig,
) -> float:
    kept, total = count_kept_edges(subgraphs, params, config)
    return kept / total if total else 1.0
