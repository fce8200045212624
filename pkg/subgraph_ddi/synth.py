#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Planted-motif data generator.

Every labelled pair ``(u, v)`` gets a fresh anchor gene ``g`` with ``(u, motif_a, g)`` and
``(v, motif_b, g)``; its label is ``a * sqrt(C) + b``. The label can be read off the pair's 2-hop
enclosing subgraph but not off fingerprints or the DDI graph alone.
"""
import logging
import math

from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from subgraph_ddi.errors import ExportError
from subgraph_ddi.utils import rng_stream

log = logging.getLogger(__name__)

INVERSE_SUFFIX = '_inv'


class SynthSpec(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    num_drugs: int = Field(500, ge=2)
    num_genes: int = Field(2000, ge=1)
    num_ddi_classes: int = Field(4, ge=2)
    kg_relations_per_drug: int = Field(3, ge=0)
    noise_edges: int = Field(2000, ge=0)
    num_pairs: int = Field(1000, ge=1)
    fingerprint_bits: int = Field(1024, ge=1)
    add_inverse: bool = True
    seed: int = Field(7, ge=0)

    @field_validator('num_ddi_classes')
    @classmethod
    def perfect_square(cls, value: int) -> int:
        if math.isqrt(value) ** 2 != value:
            raise ValueError(f'num_ddi_classes must be a perfect square, got {value}')
        return value

    @model_validator(mode='after')
    def enough_entities(self) -> 'SynthSpec':
        if self.num_pairs > self.num_genes:
            raise ValueError(f'{self.num_pairs} pairs need as many anchor genes, only {self.num_genes} available')
        if self.num_pairs > self.num_drugs * (self.num_drugs - 1) // 2:
            raise ValueError(f'{self.num_drugs} drugs cannot form {self.num_pairs} distinct pairs')
        if self.noise_edges > self.num_genes * (self.num_genes - 1):
            raise ValueError(f'{self.num_genes} genes cannot carry {self.noise_edges} distinct noise edges')
        return self

    @property
    def motif_width(self) -> int:
        return math.isqrt(self.num_ddi_classes)


class SynthFiles(NamedTuple):
    kg_file: Path
    ddi_file: Path
    fingerprint_file: Path
    truth_file: Path


def drug_name(i: int) -> str:
    return f'Compound::D{i:05d}'


def gene_name(i: int) -> str:
    return f'Gene::G{i:05d}'


def _distinct_pairs(rng: np.random.Generator, num_drugs: int, num_pairs: int) -> list[tuple[int, int]]:
    pairs: list[tuple[int, int]] = []
    seen: set[frozenset[int]] = set()
    while len(pairs) < num_pairs:
        u, v = rng.choice(num_drugs, size=2, replace=False).tolist()
        key = frozenset((u, v))
        if key not in seen:
            seen.add(key)
            pairs.append((u, v))
    return pairs


def _noise_edges(rng: np.random.Generator, num_genes: int, count: int) -> list[tuple[int, int]]:
    """Distinct directed gene-gene edges without self-loops; rejected draws are redrawn."""
    edges: dict[tuple[int, int], None] = {}
    while len(edges) < count:
        heads = rng.integers(num_genes, size=count - len(edges))
        tails = rng.integers(num_genes - 1, size=len(heads))
        tails += tails >= heads
        for edge in zip(heads.tolist(), tails.tolist()):
            if len(edges) < count:
                edges.setdefault(edge)
    return list(edges)


def generate(spec: SynthSpec) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """
    Build the synthetic tables in memory.

    :param spec: Generator settings.
    :return: ``(kg, ddi, fingerprints, truth)`` frames.
    """
    rng = np.random.default_rng(spec.seed)
    width = spec.motif_width
    pairs = _distinct_pairs(rng, spec.num_drugs, spec.num_pairs)
    anchors = rng.permutation(spec.num_genes)[: spec.num_pairs]
    motifs = rng.integers(width, size=(spec.num_pairs, 2))

    triplets: list[tuple[str, str, str]] = []
    truth = []
    for (u, v), g, (a, b) in zip(pairs, anchors.tolist(), motifs.tolist()):
        triplets.append((drug_name(u), f'motif_{a}', gene_name(g)))
        triplets.append((drug_name(v), f'motif_{b}', gene_name(g)))
        truth.append((drug_name(u), drug_name(v), a * width + b, a, b, gene_name(g)))
    if spec.kg_relations_per_drug:
        targets = rng.integers(spec.num_genes, size=(spec.num_drugs, spec.kg_relations_per_drug))
        for drug, genes in enumerate(targets.tolist()):
            triplets.extend((drug_name(drug), 'targets', gene_name(g)) for g in genes)
    if spec.noise_edges:
        triplets.extend(
            (gene_name(h), 'interacts', gene_name(t)) for h, t in _noise_edges(rng, spec.num_genes, spec.noise_edges)
        )
    if spec.add_inverse:
        triplets += [(t, f'{r}{INVERSE_SUFFIX}', h) for h, r, t in triplets]

    kg = pd.DataFrame(triplets, columns=['head', 'relation', 'tail'])
    truth_frame = pd.DataFrame(truth, columns=['drug1', 'drug2', 'label', 'a', 'b', 'anchor'])
    ddi = truth_frame[['drug1', 'drug2', 'label']]
    bits = [
        ''.join(map(str, rng_stream(spec.seed, 2, drug).integers(2, size=spec.fingerprint_bits).tolist()))
        for drug in range(spec.num_drugs)
    ]
    fingerprints = pd.DataFrame({'drug': [drug_name(i) for i in range(spec.num_drugs)], 'bits': bits})
    return kg, ddi, fingerprints, truth_frame


def gen_synth(spec: SynthSpec, out_dir: str | Path) -> SynthFiles:
    """
    Write ``kg.tsv``, ``ddi.tsv``, ``fingerprints.tsv`` and the ``truth.tsv`` manifest (pair, label and
    the motif indices it came from).

    :param spec: Generator settings.
    :param out_dir: Output directory.
    :return:
    """
    out_dir = Path(out_dir)
    files = SynthFiles(
        out_dir / 'kg.tsv', out_dir / 'ddi.tsv', out_dir / 'fingerprints.tsv', out_dir / 'truth.tsv'
    )
    kg, ddi, fingerprints, truth = generate(spec)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for frame, path in zip((kg, ddi, fingerprints), files[:3]):
            frame.to_csv(path, sep='\t', index=False, header=False, lineterminator='\n')
        truth.to_csv(files.truth_file, sep='\t', index=False, lineterminator='\n')
    except OSError as e:
        raise ExportError(f'Cannot write synthetic data to {out_dir}: {e}')
    log.info(
        'Generated %d KG triplets and %d labelled pairs (%d classes) in %s',
        len(kg),
        len(ddi),
        spec.num_ddi_classes,
        out_dir,
    )
    return files


def read_motif_labels(
    kg_file: str | Path, truth_file: str | Path, num_ddi_classes: int
) -> dict[tuple[str, str], int]:
    """
    Recover each pair's label from the KG alone: find the gene both drugs reach through a motif edge and
    decode ``a * sqrt(C) + b`` from the two motif relations.

    :param kg_file: Generated triplet file.
    :param truth_file: Manifest naming the pairs (its labels are not read).
    :param num_ddi_classes: Number of classes C.
    :return: ``(drug1, drug2) -> label``.
    """
    kg = pd.read_csv(kg_file, sep='\t', header=None, names=['head', 'relation', 'tail'], dtype=str)
    motif = kg[kg['relation'].str.fullmatch(r'motif_\d+')]
    width = math.isqrt(num_ddi_classes)
    reach: dict[str, dict[str, int]] = {}
    for head, rel, tail in motif.itertuples(index=False):
        reach.setdefault(head, {})[tail] = int(rel.removeprefix('motif_'))
    truth = pd.read_csv(truth_file, sep='\t', dtype={'drug1': str, 'drug2': str})
    labels = {}
    for u, v in zip(truth['drug1'], truth['drug2']):
        shared = sorted(reach.get(u, {}).keys() & reach.get(v, {}).keys())
        if shared:
            labels[(u, v)] = reach[u][shared[0]] * width + reach[v][shared[0]]
    return labels
