#!/usr/bin/env python3
# -*- coding: utf-8 -*-


class SubgraphDDIException(Exception):
    def __init__(self, msg: str) -> None:
        self.msg = msg

    def __str__(self) -> str:
        return self.msg


class GraphFormatError(SubgraphDDIException):
    """Error raised when a triplet, pair or fingerprint file is malformed."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class EntityNotFoundError(SubgraphDDIException):
    """Error raised when an entity or relation id is out of range or a name is unknown."""

    def __init__(self, msg: str, suggestions: list[str] | None = None) -> None:
        super().__init__(msg)
        self.suggestions = suggestions or []


class TaskModeError(SubgraphDDIException):
    """Error raised when data does not match the multi-class / multi-label task mode."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class ShapeError(SubgraphDDIException):
    """Error raised when tensor shapes are incompatible."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class NonFiniteError(SubgraphDDIException):
    """Error raised when a forward value becomes NaN or Inf."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class TapeError(SubgraphDDIException):
    """Error raised when backward is misused."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class SamplingError(SubgraphDDIException):
    """Error raised when no admissible negative entity exists."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class SplitError(SubgraphDDIException):
    """Error raised when a dataset cannot be split."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class ConfigError(SubgraphDDIException):
    """Error raised when a configuration value, ablation or sweep axis is invalid."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class CheckpointError(SubgraphDDIException):
    """Error raised when a checkpoint is corrupt, truncated or of another format version."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class ExportError(SubgraphDDIException):
    """Error raised when an output file cannot be written."""

    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class StageError(SubgraphDDIException):
    """Error raised when a pipeline stage fails, carrying the stage context."""

    def __init__(self, msg: str, stage: str) -> None:
        super().__init__(f'[{stage}] {msg}')
        self.stage = stage
