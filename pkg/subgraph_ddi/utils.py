#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import logging

from pathlib import Path

import numpy as np
import pandas as pd

from subgraph_ddi.errors import ExportError

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def setup_logging(level: str = 'INFO') -> None:
    """
    Configure the root logger for command-line use. The library itself never adds handlers.

    :param level: Logging level name.
    :return:
    """
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, force=True)


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """
    Independent random stream for a (seed, keys...) coordinate, e.g. (seed, epoch, example index).
    Streams do not depend on scheduling order.
    """
    return np.random.default_rng([seed, *keys])


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """
    Write a table as RFC-4180 CSV (CRLF line endings, minimal quoting, repr-exact floats).

    :param frame: The table to write.
    :param path: Output file path; parent directories are created.
    :return:
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator='\r\n', float_format=repr_float)
    except OSError as e:
        raise ExportError(f'Cannot write {path}: {e}')
    return path


def repr_float(value: float) -> str:
    return repr(float(value))

