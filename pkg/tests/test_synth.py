#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import pandas as pd
import pytest

from pydantic import ValidationError

from subgraph_ddi.graph import load_ddi, load_kg
from subgraph_ddi.synth import SynthSpec, drug_name, generate, read_motif_labels
from subgraph_ddi.types import TaskMode
from tests.graphs import SMALL_SYNTH


def test_spec_validation():
    with pytest.raises(ValidationError, match='perfect square'):
        SynthSpec(num_ddi_classes=6)
    with pytest.raises(ValidationError, match='anchor genes'):
        SynthSpec(num_genes=10, num_pairs=11)
    with pytest.raises(ValidationError, match='distinct pairs'):
        SynthSpec(num_drugs=4, num_pairs=7)
    with pytest.raises(ValidationError, match='noise edges'):
        SynthSpec(num_genes=3, num_pairs=2, noise_edges=7)


def test_generate_is_deterministic():
    first, second = generate(SMALL_SYNTH), generate(SMALL_SYNTH)
    for a, b in zip(first, second):
        pd.testing.assert_frame_equal(a, b)
    other = generate(SMALL_SYNTH.model_copy(update={'seed': 4}))
    assert not other[3].equals(first[3])


def test_generate_tables():
    kg, ddi, fingerprints, truth = generate(SMALL_SYNTH)
    spec = SMALL_SYNTH
    assert len(ddi) == spec.num_pairs
    assert ddi['label'].between(0, spec.num_ddi_classes - 1).all()
    assert (truth['label'] == truth['a'] * spec.motif_width + truth['b']).all()
    assert truth['anchor'].is_unique
    assert len({frozenset(p) for p in zip(ddi['drug1'], ddi['drug2'])}) == spec.num_pairs

    forward = kg[~kg['relation'].str.endswith('_inv')]
    assert len(kg) == 2 * len(forward)
    assert forward['relation'].str.startswith('motif_').sum() == 2 * spec.num_pairs
    assert (forward['relation'] == 'targets').sum() == spec.num_drugs * spec.kg_relations_per_drug
    noise = forward[forward['relation'] == 'interacts']
    assert (noise['head'] != noise['tail']).all()
    assert len(noise) == spec.noise_edges
    assert not noise.duplicated().any()

    assert len(fingerprints) == spec.num_drugs
    assert fingerprints['bits'].str.fullmatch(f'[01]{{{spec.fingerprint_bits}}}').all()
    assert fingerprints['drug'].iloc[3] == drug_name(3) == 'Compound::D00003'


def test_generate_without_inverse():
    kg, *_ = generate(SMALL_SYNTH.model_copy(update={'add_inverse': False}))
    assert not kg['relation'].str.endswith('_inv').any()


def test_motif_labels_match_truth(synth_files):
    truth = pd.read_csv(synth_files.truth_file, sep='\t')
    labels = read_motif_labels(synth_files.kg_file, synth_files.truth_file, SMALL_SYNTH.num_ddi_classes)
    assert labels == {(u, v): y for u, v, y in zip(truth['drug1'], truth['drug2'], truth['label'])}


def test_generated_files_load(synth_files):
    kg = load_kg(synth_files.kg_file)
    ddi = load_ddi(synth_files.ddi_file, TaskMode.multi_class, kg)
    assert len(ddi) == SMALL_SYNTH.num_pairs
    assert ddi.num_relations == SMALL_SYNTH.num_ddi_classes
    assert 'motif_0_inv' in kg.relation_names


def test_noise_edges_fill_small_gene_pool():
    spec = SMALL_SYNTH.model_copy(update={'num_genes': 60, 'noise_edges': 60 * 59, 'kg_relations_per_drug': 0})
    kg, *_ = generate(spec)
    noise = kg[kg['relation'] == 'interacts']
    assert len(noise) == 60 * 59
    assert not noise.duplicated().any()
    assert (noise['head'] != noise['tail']).all()
