#!/usr/bin/env python3
# -*- coding: utf-8 -*-
from enum import Enum
from typing import NamedTuple


class Triplet(NamedTuple):
    head: int
    relation: int
    tail: int


class TaskMode(str, Enum):
    multi_class = 'multi-class'
    multi_label = 'multi-label'


class Mode(str, Enum):
    train = 'train'
    infer = 'infer'
