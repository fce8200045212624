#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import logging
import re

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import pandas as pd

from subgraph_ddi.errors import (
    EntityNotFoundError,
    ExportError,
    GraphFormatError,
    SamplingError,
    SplitError,
    TaskModeError,
)
from subgraph_ddi.types import TaskMode, Triplet

log = logging.getLogger(__name__)

MAX_ID = 2**31 - 1
DDI_RELATION_PREFIX = 'DDI::'
NEGATIVE_RETRIES = 100

_LABELS_RE = re.compile(r'\d+(,\d+)*')


def ddi_relation_name(label: int) -> str:
    return f'{DDI_RELATION_PREFIX}{label}'


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _csr(keys: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind='stable')
    ptr = np.zeros(size + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=size), out=ptr[1:])
    return ptr, order


def _expand(ptr: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Concatenated CSR positions of every node in ``nodes``."""
    starts = ptr[nodes]
    lens = ptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    return np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """
    Immutable multi-relational graph in adjacency-indexed form.

    ``triplets`` is an ``(E, 3)`` array of ``(head, relation, tail)``. ``out_ptr``/``out_edges`` and
    ``in_ptr``/``in_edges`` are CSR indices over edge ids keyed by head and by tail. The undirected
    view (``und_*``) lists every edge once from each endpoint and drives neighborhood search.
    DDI label relations occupy ``[ddi_offset, ddi_offset + num_ddi_relations)`` when present.
    """

    num_entities: int
    num_relations: int
    triplets: np.ndarray
    out_ptr: np.ndarray
    out_edges: np.ndarray
    in_ptr: np.ndarray
    in_edges: np.ndarray
    und_ptr: np.ndarray
    und_nbr: np.ndarray
    und_eid: np.ndarray
    entity_names: tuple[str, ...]
    relation_names: tuple[str, ...]
    entity_types: tuple[str, ...] | None = None
    ddi_offset: int | None = None
    num_ddi_relations: int = 0

    @classmethod
    def from_triplets(
        cls,
        triplets: Iterable[Sequence[int]] | np.ndarray,
        num_entities: int,
        num_relations: int,
        entity_names: Sequence[str] | None = None,
        relation_names: Sequence[str] | None = None,
        entity_types: Sequence[str] | None = None,
        ddi_offset: int | None = None,
        num_ddi_relations: int = 0,
    ) -> 'KnowledgeGraph':
        """
        Build a graph, collapsing exact duplicates while keeping first-appearance order.

        :param triplets: ``(head, relation, tail)`` rows.
        :param num_entities: Size of the entity table.
        :param num_relations: Size of the relation table.
        :param entity_names: Optional display names, defaults to the ids.
        :param relation_names: Optional relation names, defaults to the ids.
        :param entity_types: Optional type tag per entity.
        :param ddi_offset: First relation id of the DDI label range.
        :param num_ddi_relations: Width of the DDI label range.
        :return:
        """
        rows = np.asarray(list(triplets) if not isinstance(triplets, np.ndarray) else triplets, dtype=np.int64)
        rows = rows.reshape(-1, 3)
        if num_entities > MAX_ID or num_relations > MAX_ID:
            raise GraphFormatError(f'Id overflow: {num_entities} entities / {num_relations} relations')
        if len(rows):
            heads, rels, tails = rows[:, 0], rows[:, 1], rows[:, 2]
            if heads.min() < 0 or tails.min() < 0 or max(heads.max(), tails.max()) >= num_entities:
                raise EntityNotFoundError(f'Entity id out of range [0, {num_entities})')
            if rels.min() < 0 or rels.max() >= num_relations:
                raise EntityNotFoundError(f'Relation id out of range [0, {num_relations})')
            _, first = np.unique(rows, axis=0, return_index=True)
            rows = rows[np.sort(first)]
        heads, tails = rows[:, 0], rows[:, 2]
        out_ptr, out_edges = _csr(heads, num_entities)
        in_ptr, in_edges = _csr(tails, num_entities)
        eids = np.arange(len(rows), dtype=np.int64)
        und_ptr, order = _csr(np.concatenate([heads, tails]), num_entities)
        und_nbr = np.concatenate([tails, heads])[order]
        und_eid = np.concatenate([eids, eids])[order]
        return cls(
            num_entities=num_entities,
            num_relations=num_relations,
            triplets=_frozen(rows),
            out_ptr=_frozen(out_ptr),
            out_edges=_frozen(out_edges),
            in_ptr=_frozen(in_ptr),
            in_edges=_frozen(in_edges),
            und_ptr=_frozen(und_ptr),
            und_nbr=_frozen(und_nbr),
            und_eid=_frozen(und_eid),
            entity_names=tuple(entity_names) if entity_names is not None else tuple(map(str, range(num_entities))),
            relation_names=(
                tuple(relation_names) if relation_names is not None else tuple(map(str, range(num_relations)))
            ),
            entity_types=tuple(entity_types) if entity_types is not None else None,
            ddi_offset=ddi_offset,
            num_ddi_relations=num_ddi_relations,
        )

    @property
    def num_triplets(self) -> int:
        return len(self.triplets)

    def check_entity(self, entity: int) -> None:
        if not 0 <= entity < self.num_entities:
            raise EntityNotFoundError(f'Entity id {entity} out of range [0, {self.num_entities})')

    def out_edge_ids(self, entity: int) -> np.ndarray:
        return self.out_edges[self.out_ptr[entity] : self.out_ptr[entity + 1]]

    def in_edge_ids(self, entity: int) -> np.ndarray:
        return self.in_edges[self.in_ptr[entity] : self.in_ptr[entity + 1]]

    def edge_ids_between(self, u: int, v: int, relations: Iterable[int] | None = None) -> np.ndarray:
        """Edge ids of every triplet joining u and v in either direction, optionally limited to ``relations``."""
        out = self.out_edge_ids(u)
        inc = self.in_edge_ids(u)
        ids = np.concatenate([out[self.triplets[out, 2] == v], inc[self.triplets[inc, 0] == v]])
        if relations is not None:
            ids = ids[np.isin(self.triplets[ids, 1], list(relations))]
        return np.unique(ids)

    def is_ddi_relation(self, relation: int | np.ndarray) -> bool | np.ndarray:
        if self.ddi_offset is None:
            return np.zeros_like(relation, dtype=bool) if isinstance(relation, np.ndarray) else False
        return (relation >= self.ddi_offset) & (relation < self.ddi_offset + self.num_ddi_relations)

    def entity_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.entity_names)}


class DDIPair(NamedTuple):
    head: int
    tail: int
    labels: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class DDIDataset:
    """
    Drug pairs with DDI labels in ``[0, num_relations)``. ``entity_names`` extends the KG's entity table
    with drugs the KG does not know.
    """

    pairs: tuple[DDIPair, ...]
    task_mode: TaskMode
    num_relations: int
    entity_names: tuple[str, ...]

    def __post_init__(self) -> None:
        for pair in self.pairs:
            if self.task_mode is TaskMode.multi_class and len(pair.labels) != 1:
                raise TaskModeError(f'Multi-class pair {pair.head}-{pair.tail} carries {len(pair.labels)} labels')
            if not pair.labels:
                raise TaskModeError(f'Pair {pair.head}-{pair.tail} carries no label')
            if min(pair.labels) < 0 or max(pair.labels) >= self.num_relations:
                raise EntityNotFoundError(f'Label outside [0, {self.num_relations}) for pair {pair.head}-{pair.tail}')

    def __len__(self) -> int:
        return len(self.pairs)

    def subset(self, indices: Iterable[int]) -> 'DDIDataset':
        return DDIDataset(
            pairs=tuple(self.pairs[i] for i in indices),
            task_mode=self.task_mode,
            num_relations=self.num_relations,
            entity_names=self.entity_names,
        )

    def label_counts(self) -> np.ndarray:
        counts = np.zeros(self.num_relations, dtype=np.int64)
        for pair in self.pairs:
            for label in pair.labels:
                counts[label] += 1
        return counts

    def positive_triplets(self, offset: int = 0) -> set[tuple[int, int, int]]:
        return {(p.head, offset + label, p.tail) for p in self.pairs for label in p.labels}


class DDISplits(NamedTuple):
    train: DDIDataset
    dev: DDIDataset
    test: DDIDataset


@dataclass(frozen=True, eq=False)
class DegreeTable:
    degree: np.ndarray
    cumulative_weight: np.ndarray

    @classmethod
    def from_degrees(cls, degree: Sequence[int] | np.ndarray) -> 'DegreeTable':
        degree = np.asarray(degree, dtype=np.int64)
        return cls(degree=_frozen(degree), cumulative_weight=_frozen(np.cumsum(degree.astype(np.float64) ** 0.75)))

    @classmethod
    def from_graph(cls, kg: KnowledgeGraph) -> 'DegreeTable':
        degree = np.bincount(kg.triplets[:, 0], minlength=kg.num_entities) + np.bincount(
            kg.triplets[:, 2], minlength=kg.num_entities
        )
        return cls.from_degrees(degree)

    @property
    def total_weight(self) -> float:
        return float(self.cumulative_weight[-1]) if len(self.cumulative_weight) else 0.0


@dataclass(frozen=True, eq=False)
class EnclosingSubgraph:
    """
    Induced subgraph on ``(N_k(u) ∩ N_k(v)) ∪ {u, v}``. Local index 0 is u, 1 is v, the rest ascend by
    global id. ``local_edges`` rows are ``(local_head, relation, local_tail)``; ``edge_ids`` are the
    matching rows of the source graph.
    """

    k: int
    global_nodes: np.ndarray
    dist_u: np.ndarray
    dist_v: np.ndarray
    local_edges: np.ndarray
    edge_ids: np.ndarray
    center: tuple[int, int]
    excluded: frozenset[int] = field(default_factory=frozenset)

    @property
    def num_nodes(self) -> int:
        return len(self.global_nodes)

    @property
    def num_edges(self) -> int:
        return len(self.local_edges)


def _split_fields(line: str) -> list[str]:
    return line.split('\t') if '\t' in line else line.split()


def _read_lines(path: str | Path) -> Iterable[tuple[int, str]]:
    path = Path(path)
    if not path.is_file():
        raise GraphFormatError(f'File not found: {path}')
    with path.open(encoding='utf-8') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip('\r\n')
            if not line.strip() or line.lstrip().startswith('#'):
                continue
            yield lineno, line


def _entity_type(name: str) -> str:
    return name.split('::', 1)[0] if '::' in name else 'Entity'


def load_kg(path: str | Path) -> KnowledgeGraph:
    """
    Load a ``head<TAB>relation<TAB>tail`` triplet file. Ids are assigned in first-appearance order;
    Hetionet-style ``Type::id`` names populate ``entity_types``.

    :param path: Triplet file path.
    :return:
    """
    entities: dict[str, int] = {}
    relations: dict[str, int] = {}
    rows = []
    for lineno, line in _read_lines(path):
        fields = _split_fields(line)
        if len(fields) != 3:
            raise GraphFormatError(f'{path}:{lineno}: expected 3 fields (head, relation, tail), got {len(fields)}')
        head, rel, tail = (f.strip() for f in fields)
        h = entities.setdefault(head, len(entities))
        r = relations.setdefault(rel, len(relations))
        t = entities.setdefault(tail, len(entities))
        rows.append((h, r, t))
    if not rows:
        raise GraphFormatError(f'{path}: no triplets')
    names = list(entities)
    kg = KnowledgeGraph.from_triplets(
        rows,
        len(entities),
        len(relations),
        entity_names=names,
        relation_names=list(relations),
        entity_types=[_entity_type(n) for n in names],
    )
    log.info(
        'Loaded %s: %d entities, %d relations, %d triplets', path, kg.num_entities, kg.num_relations, kg.num_triplets
    )
    return kg


def load_ddi(
    path: str | Path,
    task_mode: TaskMode | str,
    kg: KnowledgeGraph | None = None,
    num_relations: int | None = None,
) -> DDIDataset:
    """
    Load a ``drug1<TAB>drug2<TAB>label(s)`` pair file.

    :param path: Pair file path.
    :param task_mode: ``multi-class`` (one label per row) or ``multi-label`` (comma-separated labels).
    :param kg: Knowledge graph whose entity table drug names are resolved against; unknown drugs are appended.
    :param num_relations: Number of DDI relation types, defaults to the largest label + 1.
    :return:
    """
    task_mode = TaskMode(task_mode)
    names = list(kg.entity_names) if kg is not None else []
    index = {name: i for i, name in enumerate(names)}
    pairs: list[DDIPair] = []
    seen: dict[frozenset[int], tuple[int, int]] = {}
    merged = 0
    for lineno, line in _read_lines(path):
        fields = [f.strip() for f in _split_fields(line)]
        if len(fields) != 3:
            raise GraphFormatError(f'{path}:{lineno}: expected 3 fields (drug1, drug2, label), got {len(fields)}')
        label_field = fields[2]
        if not _LABELS_RE.fullmatch(label_field):
            raise GraphFormatError(f'{path}:{lineno}: unknown label separator in {label_field!r}, use commas')
        labels = tuple(sorted({int(x) for x in label_field.split(',')}))
        if task_mode is TaskMode.multi_class and ',' in label_field:
            raise TaskModeError(f'{path}:{lineno}: multi-class row carries {len(label_field.split(","))} labels')
        ids = []
        for name in fields[:2]:
            if name not in index:
                index[name] = len(names)
                names.append(name)
            ids.append(index[name])
        if ids[0] == ids[1]:
            raise GraphFormatError(f'{path}:{lineno}: a drug cannot interact with itself')
        key = frozenset(ids)
        if key in seen:
            position, first_line = seen[key]
            previous = pairs[position]
            if task_mode is TaskMode.multi_class and previous.labels != labels:
                raise GraphFormatError(
                    f'{path}:{lineno}: pair {fields[0]}-{fields[1]} already labelled {previous.labels[0]} '
                    f'on line {first_line}'
                )
            pairs[position] = previous._replace(labels=tuple(sorted({*previous.labels, *labels})))
            merged += 1
            continue
        seen[key] = (len(pairs), lineno)
        pairs.append(DDIPair(ids[0], ids[1], labels))
    if not pairs:
        raise GraphFormatError(f'{path}: no drug pairs')
    if merged:
        log.info('Merged %d repeated drug pairs in %s', merged, path)
    max_label = max(max(p.labels) for p in pairs)
    if num_relations is None:
        num_relations = max_label + 1
    elif max_label >= num_relations:
        raise GraphFormatError(f'{path}: label {max_label} exceeds the {num_relations} declared relation types')
    log.info('Loaded %s: %d pairs, %d relation types (%s)', path, len(pairs), num_relations, task_mode.value)
    return DDIDataset(pairs=tuple(pairs), task_mode=task_mode, num_relations=num_relations, entity_names=tuple(names))


def detect_task_mode(path: str | Path) -> TaskMode | None:
    """
    Task mode a pair file commits to: ``multi-label`` when any row carries several labels, `None` when every
    row carries one label, which both modes accept.

    :param path: Pair file path.
    :return:
    """
    for _, line in _read_lines(path):
        fields = _split_fields(line)
        if len(fields) == 3 and ',' in fields[2]:
            return TaskMode.multi_label
    return None


def build_propagation_graph(
    kg: KnowledgeGraph,
    train_pairs: DDIDataset,
    holdout: Sequence[DDIDataset] = (),
    use_kg: bool = True,
) -> KnowledgeGraph:
    """
    Merge the KG with the train DDI edges. DDI labels become the contiguous relation range placed after
    the KG's own relations; KG relations named ``DDI::<label>`` are folded into that range. KG triplets in
    the DDI range joining a holdout pair (either direction) are dropped.

    :param kg: The external knowledge graph.
    :param train_pairs: Train split; one triplet is added per pair-label.
    :param holdout: Dev/test splits whose pairs must not be linked by DDI edges.
    :param use_kg: If `False`, keep only the train DDI edges (the no-KG ablation).
    :return:
    """
    if tuple(train_pairs.entity_names[: kg.num_entities]) != kg.entity_names:
        raise EntityNotFoundError('DDI entity table does not extend the KG entity table')
    num_ddi = train_pairs.num_relations
    ddi_names = {ddi_relation_name(label): label for label in range(num_ddi)}
    kg_relations = [name for name in kg.relation_names if name not in ddi_names]
    offset = len(kg_relations)
    remap = np.empty(kg.num_relations, dtype=np.int64)
    for old, name in enumerate(kg.relation_names):
        remap[old] = offset + ddi_names[name] if name in ddi_names else kg_relations.index(name)
    relation_names = kg_relations + [ddi_relation_name(label) for label in range(num_ddi)]

    rows = np.empty((0, 3), dtype=np.int64)
    if use_kg and kg.num_triplets:
        rows = kg.triplets.copy()
        rows[:, 1] = remap[rows[:, 1]]
        held = {frozenset((p.head, p.tail)) for split in holdout for p in split.pairs}
        if held:
            is_ddi = rows[:, 1] >= offset
            leak = np.array([bool(d) and frozenset((h, t)) in held for (h, _, t), d in zip(rows, is_ddi)], dtype=bool)
            if leak.any():
                log.info('Removed %d KG triplets linking dev/test pairs', int(leak.sum()))
            rows = rows[~leak]
    train_rows = np.array(
        [(p.head, offset + label, p.tail) for p in train_pairs.pairs for label in p.labels], dtype=np.int64
    ).reshape(-1, 3)
    num_entities = len(train_pairs.entity_names)
    entity_types = None
    if kg.entity_types is not None:
        entity_types = list(kg.entity_types) + ['Compound'] * (num_entities - kg.num_entities)
    return KnowledgeGraph.from_triplets(
        np.concatenate([rows, train_rows]),
        num_entities,
        len(relation_names),
        entity_names=train_pairs.entity_names,
        relation_names=relation_names,
        entity_types=entity_types,
        ddi_offset=offset,
        num_ddi_relations=num_ddi,
    )


def pair_exclusions(kg: KnowledgeGraph, u: int, v: int) -> np.ndarray:
    """Edge ids of the DDI triplets joining u and v, which must not feed the pair's own prediction."""
    if kg.ddi_offset is None:
        return np.empty(0, dtype=np.int64)
    return kg.edge_ids_between(u, v, range(kg.ddi_offset, kg.ddi_offset + kg.num_ddi_relations))


def _resolve_exclusions(kg: KnowledgeGraph, exclude: Triplet | Iterable[Triplet] | None) -> np.ndarray:
    if exclude is None:
        return np.empty(0, dtype=np.int64)
    if isinstance(exclude, tuple) and len(exclude) == 3 and all(isinstance(x, (int, np.integer)) for x in exclude):
        exclude = [exclude]
    ids = [kg.edge_ids_between(h, t, [r]) for h, r, t in exclude]
    return np.unique(np.concatenate(ids)) if ids else np.empty(0, dtype=np.int64)


def _bfs(kg: KnowledgeGraph, source: int, cap: int, banned: np.ndarray) -> dict[int, int]:
    dist = {source: 0}
    seen = np.zeros(kg.num_entities, dtype=bool)
    seen[source] = True
    frontier = np.array([source], dtype=np.int64)
    for level in range(1, cap + 1):
        pos = _expand(kg.und_ptr, frontier)
        if len(banned):
            pos = pos[~np.isin(kg.und_eid[pos], banned)]
        nbrs = np.unique(kg.und_nbr[pos])
        frontier = nbrs[~seen[nbrs]]
        if not len(frontier):
            break
        seen[frontier] = True
        dist.update(dict.fromkeys(frontier.tolist(), level))
    return dist


def bfs_distances(kg: KnowledgeGraph, source: int, cap: int, banned_edges: Iterable[int] = ()) -> dict[int, int]:
    """
    Hop distances from ``source`` treating every triplet as an undirected edge. Nodes farther than ``cap``
    are absent from the result (unreachable).

    :param kg: The graph.
    :param source: Start entity.
    :param cap: Hop budget, at least 1.
    :param banned_edges: Edge ids that may not be traversed.
    :return:
    """
    kg.check_entity(source)
    if cap < 1:
        raise ValueError('BFS cap must be at least 1')
    return _bfs(kg, source, cap, np.asarray(list(banned_edges), dtype=np.int64))


def extract_enclosing_subgraph(
    kg: KnowledgeGraph,
    u: int,
    v: int,
    k: int,
    exclude: Triplet | Iterable[Triplet] | None = None,
    exclude_edge_ids: Iterable[int] = (),
) -> EnclosingSubgraph:
    """
    Extract the k-hop enclosing subgraph of ``(u, v)`` with double-radius distances.

    :param kg: The propagation graph.
    :param u: First center, local index 0.
    :param v: Second center, local index 1.
    :param k: Hop budget.
    :param exclude: Target triplet(s) removed from the subgraph edges in both directions. Nodes and distances
        are unaffected.
    :param exclude_edge_ids: Further edge ids to remove, e.g. from :func:`pair_exclusions`.
    :return:
    """
    kg.check_entity(u)
    kg.check_entity(v)
    if u == v:
        raise ValueError(f'Enclosing subgraph needs two distinct centers, got {u} twice')
    banned = np.union1d(_resolve_exclusions(kg, exclude), np.asarray(list(exclude_edge_ids), dtype=np.int64))
    banned = banned.astype(np.int64)
    # distances and the node set come from the full graph; exclusions only drop edges
    du = _bfs(kg, u, k, np.empty(0, dtype=np.int64))
    dv = _bfs(kg, v, k, np.empty(0, dtype=np.int64))
    inner = sorted((du.keys() & dv.keys()) - {u, v})
    nodes = np.array([u, v, *inner], dtype=np.int64)
    local = np.full(kg.num_entities, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))

    eids = kg.out_edges[_expand(kg.out_ptr, nodes)]
    eids = np.sort(eids[local[kg.triplets[eids, 2]] >= 0])
    if len(banned):
        eids = eids[~np.isin(eids, banned)]
    rows = kg.triplets[eids]
    local_edges = np.stack([local[rows[:, 0]], rows[:, 1], local[rows[:, 2]]], axis=1) if len(rows) else rows
    return EnclosingSubgraph(
        k=k,
        global_nodes=_frozen(nodes),
        dist_u=_frozen(np.array([min(du.get(int(n), k), k) for n in nodes], dtype=np.int64)),
        dist_v=_frozen(np.array([min(dv.get(int(n), k), k) for n in nodes], dtype=np.int64)),
        local_edges=_frozen(local_edges.reshape(-1, 3)),
        edge_ids=_frozen(eids),
        center=(u, v),
        excluded=frozenset(banned.tolist()),
    )


def pair_subgraph(kg: KnowledgeGraph, u: int, v: int, k: int) -> EnclosingSubgraph:
    """Enclosing subgraph of ``(u, v)`` with every DDI triplet between the two centers removed."""
    return extract_enclosing_subgraph(kg, u, v, k, exclude_edge_ids=pair_exclusions(kg, u, v))


def sample_negative_tail(
    degrees: DegreeTable,
    positive: tuple[int, int, int],
    forbidden: set[tuple[int, int, int]] | frozenset,
    rng: np.random.Generator,
    max_retries: int = NEGATIVE_RETRIES,
) -> int:
    """
    Corrupt the tail of ``positive`` with an entity drawn proportionally to ``degree ** 0.75``. Neither
    center of the positive pair is admissible, since ``(u, u)`` has no enclosing subgraph.

    :param degrees: Sampling table.
    :param positive: The positive triplet ``(u, r, v)``.
    :param forbidden: Known triplets the corruption may not produce.
    :param rng: Random stream.
    :param max_retries: Rejections before falling back to a uniform draw over admissible entities.
    :return:
    """
    u, r, v = positive
    total = degrees.total_weight
    n = len(degrees.degree)
    if total > 0:
        for _ in range(max_retries):
            w = int(np.searchsorted(degrees.cumulative_weight, rng.random() * total, side='right'))
            if w < n and w not in (u, v) and (u, r, w) not in forbidden:
                return w
    admissible = [w for w in range(n) if w not in (u, v) and (u, r, w) not in forbidden]
    if not admissible:
        raise SamplingError(f'No admissible negative tail for ({u}, {r}, {v})')
    return int(admissible[rng.integers(len(admissible))])


def _allocate(n: int, ratios: Sequence[float]) -> list[int]:
    dev = round(ratios[1] * n)
    test = round(ratios[2] * n)
    return [n - dev - test, dev, test]


def split_dataset(
    ddi: DDIDataset,
    ratios: Sequence[float] = (0.7, 0.1, 0.2),
    stratified: bool = True,
    seed: int = 0,
) -> DDISplits:
    """
    Partition pairs into train/dev/test. With ``stratified``, every class with at least three samples
    appears in all three splits; rarer classes go to train. Multi-label pairs are stratified by their
    smallest label.

    :param ddi: Dataset to split.
    :param ratios: Train/dev/test ratios summing to 1.
    :param stratified: Split each class separately.
    :param seed: Shuffle seed.
    :return:
    """
    if not len(ddi):
        raise SplitError('Cannot split an empty dataset')
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f'Split ratios must be three non-negative values summing to 1, got {tuple(ratios)}')
    keys = [frozenset((p.head, p.tail)) for p in ddi.pairs]
    if len(set(keys)) != len(keys):
        raise SplitError('Dataset repeats a drug pair; merge its labels before splitting')
    rng = np.random.default_rng(seed)
    parts: list[list[int]] = [[], [], []]
    if stratified:
        by_class: dict[int, list[int]] = {}
        for i, pair in enumerate(ddi.pairs):
            by_class.setdefault(min(pair.labels), []).append(i)
        for label in sorted(by_class):
            members = np.array(by_class[label])[rng.permutation(len(by_class[label]))].tolist()
            if len(members) < 3:
                log.warning('Class %d has %d samples, assigning all to train', label, len(members))
                parts[0].extend(members)
                continue
            sizes = _allocate(len(members), ratios)
            sizes[1], sizes[2] = max(sizes[1], 1), max(sizes[2], 1)
            while sizes[1] + sizes[2] > len(members) - 1:
                sizes[2 if sizes[2] >= sizes[1] else 1] -= 1
            sizes[0] = len(members) - sizes[1] - sizes[2]
            parts[0].extend(members[: sizes[0]])
            parts[1].extend(members[sizes[0] : sizes[0] + sizes[1]])
            parts[2].extend(members[sizes[0] + sizes[1] :])
        parts = [sorted(p) for p in parts]
    else:
        order = rng.permutation(len(ddi)).tolist()
        sizes = _allocate(len(ddi), ratios)
        parts = [
            sorted(order[: sizes[0]]),
            sorted(order[sizes[0] : sizes[0] + sizes[1]]),
            sorted(order[sizes[0] + sizes[1] :]),
        ]
    return DDISplits(*(ddi.subset(p) for p in parts))


def export_id_maps(kg: KnowledgeGraph, out_dir: str | Path) -> tuple[Path, Path]:
    """
    Write ``entities.tsv`` and ``relations.tsv`` (``id<TAB>name``).

    :param kg: Graph whose tables are exported.
    :param out_dir: Output directory.
    :return:
    """
    out_dir = Path(out_dir)
    paths = (out_dir / 'entities.tsv', out_dir / 'relations.tsv')
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for path, names in zip(paths, (kg.entity_names, kg.relation_names)):
            pd.DataFrame({'id': range(len(names)), 'name': names}).to_csv(path, sep='\t', index=False, header=False)
    except OSError as e:
        raise ExportError(f'Cannot write id maps to {out_dir}: {e}')
    return paths
