#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Binary checkpoint container.

Layout (all integers little-endian)::

    magic         8 bytes  b'SGDDI\\x00CK'
    version       u32
    header        u64 length + UTF-8 JSON (run config, id maps, optimizer scalars, best epoch)
    tensor count  u32
    tensors       per tensor: u16 name length, name, u8 ndim, ndim x u64 dims, float64 data
    digest        32 bytes SHA-256 of everything above
"""
import hashlib
import io
import logging
import struct

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pydantic import BaseModel, ConfigDict, ValidationError

from subgraph_ddi.config import RunConfig
from subgraph_ddi.errors import CheckpointError
from subgraph_ddi.model import ModelConfig, ModelParams
from subgraph_ddi.tensor import AdamState

log = logging.getLogger(__name__)

MAGIC = b'SGDDI\x00CK'
FORMAT_VERSION = 1
DIGEST_SIZE = 32


class CheckpointHeader(BaseModel):
    model_config = ConfigDict(extra='forbid')

    format_version: int
    run: RunConfig
    model: ModelConfig
    entity_names: list[str]
    relation_names: list[str]
    ddi_offset: int
    best_epoch: int
    best_val_loss: float
    adam_t: int | None = None
    adam_betas: tuple[float, float] | None = None
    adam_eps: float | None = None


@dataclass
class Checkpoint:
    """Everything needed to reload a trained model and to check it against re-loaded data."""

    run: RunConfig
    model: ModelConfig
    params: ModelParams
    entity_names: tuple[str, ...]
    relation_names: tuple[str, ...]
    ddi_offset: int
    best_epoch: int
    best_val_loss: float
    adam: AdamState | None = None
    format_version: int = FORMAT_VERSION


def _tensor_record(out: io.BytesIO, name: str, array: np.ndarray) -> None:
    encoded = name.encode('utf-8')
    out.write(struct.pack('<H', len(encoded)))
    out.write(encoded)
    out.write(struct.pack('<B', array.ndim))
    out.write(struct.pack(f'<{array.ndim}Q', *array.shape))
    out.write(np.ascontiguousarray(array, dtype='<f8').tobytes())


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    adam = checkpoint.adam
    header = CheckpointHeader(
        format_version=checkpoint.format_version,
        run=checkpoint.run,
        model=checkpoint.model,
        entity_names=list(checkpoint.entity_names),
        relation_names=list(checkpoint.relation_names),
        ddi_offset=checkpoint.ddi_offset,
        best_epoch=checkpoint.best_epoch,
        best_val_loss=checkpoint.best_val_loss,
        adam_t=adam.t if adam else None,
        adam_betas=(adam.beta1, adam.beta2) if adam else None,
        adam_eps=adam.eps if adam else None,
    )
    tensors = list(checkpoint.params.tensors.items())
    if adam is not None:
        tensors += [(f'adam.m.{k}', v) for k, v in adam.m.items()]
        tensors += [(f'adam.s.{k}', v) for k, v in adam.s.items()]
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack('<I', checkpoint.format_version))
    encoded = header.model_dump_json().encode('utf-8')
    out.write(struct.pack('<Q', len(encoded)))
    out.write(encoded)
    out.write(struct.pack('<I', len(tensors)))
    for name, array in tensors:
        _tensor_record(out, name, array)
    body = out.getvalue()
    return body + hashlib.sha256(body).digest()


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> Path:
    """
    Write ``checkpoint`` to ``path``.

    :param checkpoint: Trained state.
    :param path: Output file; parent directories are created.
    :return:
    """
    path = Path(path)
    data = encode_checkpoint(checkpoint)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise CheckpointError(f'Cannot write checkpoint {path}: {e}')
    log.info('Saved checkpoint %s (%d bytes)', path, len(data))
    return path


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise CheckpointError('Checkpoint is truncated')
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError('Not a checkpoint file (bad magic)')
    (version,) = struct.unpack('<I', data[len(MAGIC) : len(MAGIC) + 4])
    if version != FORMAT_VERSION:
        raise CheckpointError(f'Checkpoint format version {version} is not supported (expected {FORMAT_VERSION})')
    if len(data) < len(MAGIC) + 4 + DIGEST_SIZE:
        raise CheckpointError('Checkpoint is truncated')
    body, digest = data[:-DIGEST_SIZE], data[-DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError('Checkpoint integrity check failed (truncated or corrupt file)')

    reader = _Reader(body)
    reader.take(len(MAGIC) + 4)
    (header_len,) = reader.unpack('<Q')
    try:
        header = CheckpointHeader.model_validate_json(reader.take(header_len))
    except ValidationError as e:
        raise CheckpointError(f'Corrupt checkpoint header: {e}')
    (count,) = reader.unpack('<I')
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack('<H')
        name = reader.take(name_len).decode('utf-8')
        (ndim,) = reader.unpack('<B')
        shape = reader.unpack(f'<{ndim}Q')
        size = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(reader.take(8 * size), dtype='<f8').astype(np.float64).reshape(shape)
    if reader.pos != len(body):
        raise CheckpointError('Trailing bytes after the last tensor')

    adam = None
    if header.adam_t is not None:
        m = {k.removeprefix('adam.m.'): v for k, v in tensors.items() if k.startswith('adam.m.')}
        s = {k.removeprefix('adam.s.'): v for k, v in tensors.items() if k.startswith('adam.s.')}
        beta1, beta2 = header.adam_betas
        adam = AdamState(m=m, s=s, t=header.adam_t, beta1=beta1, beta2=beta2, eps=header.adam_eps)
    params = ModelParams({k: v for k, v in tensors.items() if not k.startswith('adam.')})
    return Checkpoint(
        run=header.run,
        model=header.model,
        params=params,
        entity_names=tuple(header.entity_names),
        relation_names=tuple(header.relation_names),
        ddi_offset=header.ddi_offset,
        best_epoch=header.best_epoch,
        best_val_loss=header.best_val_loss,
        adam=adam,
        format_version=header.format_version,
    )


def load_checkpoint(path: str | Path) -> Checkpoint:
    """
    Read and verify a checkpoint; nothing is returned unless the whole file checks out.

    :param path: Checkpoint file.
    :return:
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f'Checkpoint not found: {path}')
    return decode_checkpoint(path.read_bytes())
