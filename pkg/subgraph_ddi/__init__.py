#!/usr/bin/env python3
# -*- coding: utf-8 -*-
from .checkpoint import Checkpoint as Checkpoint
from .checkpoint import load_checkpoint as load_checkpoint
from .checkpoint import save_checkpoint as save_checkpoint
from .config import RunConfig as RunConfig
from .config import load_config as load_config
from .explain import PathwayGraph as PathwayGraph
from .explain import export_dot as export_dot
from .explain import export_json as export_json
from .explain import summarize_pathway as summarize_pathway
from .graph import DDIDataset as DDIDataset
from .graph import KnowledgeGraph as KnowledgeGraph
from .graph import build_propagation_graph as build_propagation_graph
from .graph import extract_enclosing_subgraph as extract_enclosing_subgraph
from .graph import load_ddi as load_ddi
from .graph import load_kg as load_kg
from .graph import split_dataset as split_dataset
from .metrics import MetricsReport as MetricsReport
from .metrics import evaluate as evaluate
from .model import FingerprintTable as FingerprintTable
from .model import ModelConfig as ModelConfig
from .model import ModelParams as ModelParams
from .model import forward as forward
from .model import init_params as init_params
from .synth import SynthSpec as SynthSpec
from .synth import gen_synth as gen_synth
from .train import TrainConfig as TrainConfig
from .train import fit as fit
from .train import predict as predict
from .types import TaskMode as TaskMode

__version__ = '0.1.0'
