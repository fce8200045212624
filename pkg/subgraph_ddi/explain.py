#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Reasoning pathways: the part of a pair's subgraph that survives attention pruning, exportable as
Graphviz DOT or JSON.
"""
import json
import logging

from pathlib import Path

import numpy as np
import pydot

from pydantic import BaseModel, ConfigDict, model_validator

from subgraph_ddi.errors import ExportError, GraphFormatError
from subgraph_ddi.graph import EnclosingSubgraph, KnowledgeGraph
from subgraph_ddi.model import AttentionMask

log = logging.getLogger(__name__)

PENWIDTH_MIN = 1.0
PENWIDTH_MAX = 5.0
LIGHTEST_GRAY = 90


class PathwayNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    name: str
    type: str
    is_center: bool = False


class PathwayEdge(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: int
    target: int
    relation: str
    weight: float


class PathwayGraph(BaseModel):
    """Pruned subgraph of a drug pair with its attention weights."""

    model_config = ConfigDict(frozen=True)

    nodes: list[PathwayNode]
    edges: list[PathwayEdge]
    gamma: float = 0.0
    directed: bool = True

    @model_validator(mode='after')
    def check_shape(self) -> 'PathwayGraph':
        if sum(n.is_center for n in self.nodes) != 2:
            raise ValueError('A pathway holds exactly two center nodes')
        ids = {n.id for n in self.nodes}
        touched = set()
        for edge in self.edges:
            if edge.weight == 0.0:
                raise ValueError(f'Zero-weight edge {edge.source}->{edge.target}')
            if edge.source not in ids or edge.target not in ids:
                raise ValueError(f'Edge {edge.source}->{edge.target} references an unknown node')
            touched.update((edge.source, edge.target))
        isolated = [n.id for n in self.nodes if not n.is_center and n.id not in touched]
        if isolated:
            raise ValueError(f'Isolated non-center nodes {isolated}')
        return self

    @property
    def centers(self) -> tuple[int, int]:
        u, v = (n.id for n in self.nodes if n.is_center)
        return u, v


def summarize_pathway(
    subgraph: EnclosingSubgraph,
    mask: AttentionMask | None,
    graph: KnowledgeGraph,
) -> PathwayGraph:
    """
    Drop pruned edges, then every non-center node left without an edge.

    :param subgraph: The pair's enclosing subgraph.
    :param mask: Its attention mask; `None` keeps every edge with weight 1.
    :param graph: Graph supplying entity and relation names.
    :return:
    """
    if mask is None:
        kept = np.ones(subgraph.num_edges, dtype=bool)
        weights = np.ones(subgraph.num_edges)
        gamma = -1.0
    else:
        if len(mask.kept) != subgraph.num_edges:
            raise ValueError(f'Mask covers {len(mask.kept)} edges, subgraph has {subgraph.num_edges}')
        kept, weights, gamma = mask.kept, mask.values, mask.gamma
    local_edges = subgraph.local_edges[kept]
    used = {0, 1} | set(local_edges[:, 0].tolist()) | set(local_edges[:, 2].tolist())
    types = graph.entity_types
    nodes = [
        PathwayNode(
            id=int(gid),
            name=graph.entity_names[gid],
            type=types[gid] if types is not None else 'Entity',
            is_center=local < 2,
        )
        for local, gid in enumerate(subgraph.global_nodes)
        if local in used
    ]
    edges = [
        PathwayEdge(
            source=int(subgraph.global_nodes[i]),
            target=int(subgraph.global_nodes[j]),
            relation=graph.relation_names[r],
            weight=float(w),
        )
        for (i, r, j), w in zip(local_edges, weights[kept])
    ]
    log.debug(
        'Pathway keeps %d of %d edges, %d of %d nodes', len(edges), subgraph.num_edges, len(nodes), subgraph.num_nodes
    )
    return PathwayGraph(nodes=nodes, edges=edges, gamma=gamma)


def merge_antiparallel(pathway: PathwayGraph) -> PathwayGraph:
    """Collapse edges joining the same two nodes into one undirected edge carrying the largest weight."""
    merged: dict[frozenset[int], PathwayEdge] = {}
    relations: dict[frozenset[int], set[str]] = {}
    for edge in pathway.edges:
        key = frozenset((edge.source, edge.target))
        relations.setdefault(key, set()).add(edge.relation)
        if key not in merged or edge.weight > merged[key].weight:
            merged[key] = edge
    edges = [
        edge.model_copy(update={'relation': ' | '.join(sorted(relations[key]))}) for key, edge in merged.items()
    ]
    return PathwayGraph(nodes=pathway.nodes, edges=edges, gamma=pathway.gamma, directed=False)


def edge_shade(weight: float, gamma: float) -> float:
    """Position of ``weight`` on the ``(gamma, 1)`` ramp, clipped to ``[0, 1]``."""
    return float(np.clip((weight - gamma) / (1.0 - gamma), 0.0, 1.0)) if gamma < 1.0 else 1.0


def to_dot(pathway: PathwayGraph) -> pydot.Dot:
    dot = pydot.Dot('pathway', graph_type='digraph' if pathway.directed else 'graph')
    for node in pathway.nodes:
        dot.add_node(
            pydot.Node(
                f'n{node.id}',
                label=node.name,
                shape='doublecircle' if node.is_center else 'ellipse',
                tooltip=node.type,
            )
        )
    for edge in pathway.edges:
        shade = edge_shade(edge.weight, pathway.gamma)
        dot.add_edge(
            pydot.Edge(
                f'n{edge.source}',
                f'n{edge.target}',
                label=edge.relation,
                penwidth=f'{PENWIDTH_MIN + (PENWIDTH_MAX - PENWIDTH_MIN) * shade:.2f}',
                color=f'gray{round(LIGHTEST_GRAY * (1.0 - shade))}',
            )
        )
    return dot


def export_dot(pathway: PathwayGraph, path: str | Path) -> Path:
    """
    Write the pathway as Graphviz DOT: centers as double circles, edge weight as pen width and a gray ramp
    from light (just above the threshold) to black (weight 1).

    :param pathway: Pathway to render.
    :param path: Output file.
    :return:
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(to_dot(pathway).to_string(), encoding='utf-8')
    except OSError as e:
        raise ExportError(f'Cannot write {path}: {e}')
    return path


def pathway_document(pathway: PathwayGraph) -> str:
    # floats are written by repr so a reload reproduces every weight bit for bit
    return json.dumps(pathway.model_dump(), sort_keys=True, indent=2) + '\n'


def export_json(pathway: PathwayGraph, path: str | Path) -> Path:
    """Write the pathway as JSON with sorted keys and full-precision weights."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(pathway_document(pathway), encoding='utf-8')
    except OSError as e:
        raise ExportError(f'Cannot write {path}: {e}')
    return path


def load_json(path: str | Path) -> PathwayGraph:
    path = Path(path)
    if not path.is_file():
        raise GraphFormatError(f'File not found: {path}')
    try:
        return PathwayGraph.model_validate_json(path.read_text(encoding='utf-8'))
    except ValueError as e:
        raise GraphFormatError(f'{path}: not a pathway document: {e}')
