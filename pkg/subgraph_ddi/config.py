#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import sys

from pathlib import Path
from typing import Any, Iterable

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from subgraph_ddi.errors import ConfigError
from subgraph_ddi.model import ModelConfig
from subgraph_ddi.train import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ABLATIONS = {
    'no-kg': 'use_kg',
    'no-sum': 'use_summarization',
    'no-sf': 'use_subgraph_feature',
    'no-cf': 'use_fingerprint',
    'no-lia': 'layer_independent_attention',
}

SWEEP_AXES = {'k': 'k', 'd': 'd', 'gamma': 'gamma'}


class DataConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    kg_file: Path | None = None
    ddi_file: Path | None = None
    fingerprint_file: Path | None = None
    out_dir: Path = Path('runs')
    split_ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    stratified: bool = True
    seed: int = Field(0, ge=0)

    @field_validator('split_ratios')
    @classmethod
    def ratios_sum_to_one(cls, value: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(r < 0 for r in value) or abs(sum(value) - 1.0) > 1e-9:
            raise ValueError(f'split ratios must be non-negative and sum to 1, got {value}')
        return value


class AblationConfig(BaseModel):
    """Ablation switches; TOML keys and CLI names use the hyphenated form (``no-kg``)."""

    model_config = ConfigDict(
        extra='forbid', frozen=True, populate_by_name=True, alias_generator=lambda name: name.replace('_', '-')
    )

    no_kg: bool = False
    no_sum: bool = False
    no_sf: bool = False
    no_cf: bool = False
    no_lia: bool = False

    @classmethod
    def from_names(cls, names: Iterable[str]) -> 'AblationConfig':
        names = list(names)
        unknown = sorted(set(names) - ABLATIONS.keys())
        if unknown:
            raise ConfigError(f'Unknown ablation {", ".join(unknown)}; valid ablations: {", ".join(ABLATIONS)}')
        return cls(**{name.replace('-', '_'): True for name in names})

    @property
    def names(self) -> list[str]:
        return [name for name in ABLATIONS if getattr(self, name.replace('-', '_'))]

    def merged(self, other: 'AblationConfig') -> 'AblationConfig':
        return AblationConfig.from_names(sorted(set(self.names) | set(other.names), key=list(ABLATIONS).index))

    def apply(self, model: ModelConfig) -> ModelConfig:
        return model.model_copy(update={ABLATIONS[name]: False for name in self.names})


class RunConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    data: DataConfig = DataConfig()
    ablation: AblationConfig = AblationConfig()

    def effective_model(self) -> ModelConfig:
        """Model configuration with the ablation switches applied."""
        return self.ablation.apply(self.model)

    def check_inputs(self) -> None:
        """Raise unless the KG and DDI files (and the fingerprint file, if set) exist."""
        for name in ('kg_file', 'ddi_file', 'fingerprint_file'):
            path = getattr(self.data, name)
            if path is None:
                if name != 'fingerprint_file':
                    raise ConfigError(f'data.{name} is not set')
                continue
            if not path.is_file():
                raise ConfigError(f'data.{name} does not exist: {path}')


def load_config(path: str | Path | None = None) -> RunConfig:
    """
    Read a TOML run configuration with ``[model]``, ``[train]``, ``[data]`` and ``[ablation]`` tables.
    Missing keys keep their defaults; unknown keys are rejected.

    :param path: Config file, or `None` for all defaults.
    :return:
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'Config file not found: {path}')
    try:
        with path.open('rb') as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f'{path}: {e}')
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f'{path}: {e}')


def apply_overrides(config: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """
    Replace dotted keys (``model.k``, ``train.epochs`` ...) with the given values; `None` values are skipped.
    ``ablation`` takes a list of ablation names added to the configured ones.

    :param config: Base configuration.
    :param overrides: Dotted key to value.
    :return:
    """
    raw = config.model_dump()
    ablation = config.ablation
    for key, value in overrides.items():
        if value is None:
            continue
        if key == 'ablation':
            ablation = ablation.merged(AblationConfig.from_names(value))
            continue
        section, _, name = key.partition('.')
        if section not in raw or name not in raw[section]:
            raise ConfigError(f'Unknown configuration key {key!r}')
        raw[section][name] = value
    raw['ablation'] = ablation.model_dump()
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(str(e))


def sweep_override(axis: str, value: float) -> dict[str, Any]:
    if axis not in SWEEP_AXES:
        raise ConfigError(f'Invalid sweep axis {axis!r}; valid axes: {", ".join(SWEEP_AXES)}')
    if axis == 'gamma':
        return {'model.gamma': float(value)}
    if float(value) != int(value):
        raise ConfigError(f'Sweep axis {axis} takes integers, got {value}')
    return {f'model.{SWEEP_AXES[axis]}': int(value)}
