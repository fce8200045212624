#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Dense float64 tensors with tape-based reverse-mode differentiation, Adam and gradient clipping.

Every primitive records one entry on the active :class:`Tape` when any input requires a gradient.
A tape belongs to the context (thread) that created it, so independent examples can be differentiated
concurrently with one tape each.
"""
import itertools

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from subgraph_ddi.errors import NonFiniteError, ShapeError, TapeError

_active_tape: ContextVar['Tape | None'] = ContextVar('active_tape', default=None)
_grad_enabled: ContextVar[bool] = ContextVar('grad_enabled', default=True)
_sequence = itertools.count()


class Tensor:
    __slots__ = ('data', 'requires_grad', 'grad', 'name', '_tape')

    def __init__(self, data, requires_grad: bool = False, name: str | None = None) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f'item() needs a single value, got shape {self.shape}')
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def grad_or_zeros(self) -> np.ndarray:
        return self.grad if self.grad is not None else np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f' {self.name}' if self.name else ''
        return f'Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})'

    def __matmul__(self, other: 'Tensor') -> 'Tensor':
        return matmul(self, other)

    def __add__(self, other: 'Tensor') -> 'Tensor':
        return add(self, other)

    def __mul__(self, other: 'Tensor') -> 'Tensor':
        return mul(self, other)


@dataclass
class _Record:
    seq: int
    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered record of executed primitives; backward replays it in reverse."""

    records: list[_Record] = field(default_factory=list)
    consumed: bool = False
    _token: object = None

    def __enter__(self) -> 'Tape':
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.records)


@contextmanager
def no_grad() -> Iterator[None]:
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _emit(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f'{op} produced non-finite values')
    requires = _grad_enabled.get() and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires)
    if requires:
        tape = _active_tape.get()
        if tape is None:
            tape = Tape()
            _active_tape.set(tape)
        if tape.consumed:
            raise TapeError('Tape already consumed by backward; open a new Tape for the next forward pass')
        tape.records.append(_Record(next(_sequence), op, out, tuple(inputs), backward))
        out._tape = tape
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f'{op}: incompatible shapes {a.shape} and {b.shape}')


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f'matmul: incompatible shapes {a.shape} and {b.shape}')
    return _emit('matmul', a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape('add', a, b)
    return _emit('add', a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape('mul', a, b)
    return _emit('mul', a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, c: float) -> Tensor:
    return _emit('scale', a.data * c, (a,), lambda g: (g * c,))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f'concat: incompatible shapes {[t.shape for t in tensors]} along axis {axis}')
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _emit('concat', data, tensors, lambda g: np.split(g, bounds, axis=axis))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _emit('tanh', out, (a,), lambda g: (g * (1.0 - out**2),))


def relu(a: Tensor) -> Tensor:
    positive = a.data > 0
    return _emit('relu', np.where(positive, a.data, 0.0), (a,), lambda g: (g * positive,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)
    return _emit('sigmoid', out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a: Tensor) -> Tensor:
    """``log(1 + exp(x))`` in its overflow-free form."""
    return _emit('softplus', np.logaddexp(0.0, a.data), (a,), lambda g: (g * _sigmoid(a.data),))


def softmax_rows(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return _emit('softmax_rows', out, (a,), lambda g: (out * (g - (g * out).sum(axis=1, keepdims=True)),))


def log_softmax_rows(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(out)
    return _emit('log_softmax_rows', out, (a,), lambda g: (g - probs * g.sum(axis=1, keepdims=True),))


def mean_rows(a: Tensor) -> Tensor:
    """Column-wise mean over rows, shape ``(1, m)``."""
    n = a.shape[0]
    if n == 0:
        raise ShapeError('mean_rows: empty tensor')
    return _emit('mean_rows', a.data.mean(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g / n, n, axis=0),))


def sum_all(a: Tensor) -> Tensor:
    return _emit('sum_all', np.asarray(a.data.sum()), (a,), lambda g: (np.full(a.shape, float(g)),))


def dropout(
    a: Tensor,
    p: float,
    rng: np.random.Generator | None = None,
    training: bool = True,
    mask: np.ndarray | None = None,
) -> Tensor:
    """
    Inverted dropout: survivors are scaled by ``1 / (1 - p)``; identity when not training.

    :param a: Input tensor.
    :param p: Drop probability in ``[0, 1)``.
    :param rng: Random stream used to draw the mask.
    :param training: If `False`, return the input unchanged.
    :param mask: A frozen keep-mask (bool array) overriding ``rng``.
    :return:
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f'Dropout probability must lie in [0, 1), got {p}')
    if not training or p == 0.0:
        return a
    if mask is None:
        if rng is None:
            raise ValueError('dropout needs an rng or a frozen mask in training mode')
        mask = rng.random(a.shape) >= p
    keep = mask.astype(np.float64) / (1.0 - p)
    return _emit('dropout', a.data * keep, (a,), lambda g: (g * keep,))


def gather_rows(a: Tensor, indices: Sequence[int] | np.ndarray) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)

    def backward(g: np.ndarray):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _emit('gather_rows', a.data[idx], (a,), backward)


def scatter_add_rows(target: Tensor, indices: Sequence[int] | np.ndarray, values: Tensor) -> Tensor:
    """``target`` with ``values[i]`` added to row ``indices[i]``; repeated indices accumulate."""
    idx = np.asarray(indices, dtype=np.int64)
    if values.data.ndim != 2 or values.shape[0] != len(idx) or values.shape[1] != target.shape[1]:
        raise ShapeError(f'scatter_add_rows: values {values.shape} do not fit target {target.shape} at {len(idx)} rows')
    out = target.data.copy()
    np.add.at(out, idx, values.data)
    return _emit('scatter_add_rows', out, (target, values), lambda g: (g, g[idx]))


def backward(loss: Tensor) -> None:
    """
    Populate ``grad`` of every tensor on the loss's tape, replaying records in reverse order.
    Leaf gradients accumulate across calls until they are zeroed.

    :param loss: Scalar tensor produced under a tape.
    :return:
    """
    if loss.data.size != 1:
        raise ShapeError(f'backward needs a scalar loss, got shape {loss.shape}')
    tape = loss._tape
    if tape is None or not tape.records:
        raise TapeError('Nothing to differentiate: the loss was not recorded on a tape')
    if tape.consumed:
        raise TapeError('backward called twice on the same tape; re-run the forward pass first')
    produced = {id(r.output) for r in tape.records}
    for record in tape.records:
        record.output.grad = np.zeros_like(record.output.data)
        for t in record.inputs:
            if t.requires_grad and t.grad is None and id(t) not in produced:
                t.grad = np.zeros_like(t.data)
    loss.grad = np.ones_like(loss.data)
    for record in reversed(tape.records):
        grads = record.backward(record.output.grad)
        for t, g in zip(record.inputs, grads):
            if t.requires_grad and g is not None:
                t.grad += _unbroadcast(np.asarray(g), t.shape)
    tape.consumed = True
    if _active_tape.get() is tape:
        _active_tape.set(None)


def finite_diff_check(f: Callable[[Sequence[Tensor]], Tensor], params: Sequence[Tensor], eps: float = 1e-5) -> float:
    """
    Compare backward gradients with central differences over every coordinate of ``params``.

    :param f: Deterministic scalar function of ``params`` (dropout off).
    :param params: Leaf tensors with ``requires_grad``; perturbed in place and restored.
    :param eps: Finite-difference step in ``[1e-7, 1e-3]``.
    :return: ``max |a - n| / max(1, |a|, |n|)``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f'eps must lie in [1e-7, 1e-3], got {eps}')
    for p in params:
        p.zero_grad()
    with Tape():
        loss = f(params)
        if loss.requires_grad:
            backward(loss)
    analytic = [p.grad_or_zeros().copy() for p in params]
    worst = 0.0
    with no_grad():
        for p, a in zip(params, analytic):
            flat = p.data.reshape(-1)
            grad = a.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + eps
                up = _as_tensor(f(params)).item()
                flat[i] = original - eps
                down = _as_tensor(f(params)).item()
                flat[i] = original
                if not (np.isfinite(up) and np.isfinite(down)):
                    raise NonFiniteError('finite_diff_check: f returned a non-finite value')
                numeric = (up - down) / (2.0 * eps)
                worst = max(worst, abs(grad[i] - numeric) / max(1.0, abs(grad[i]), abs(numeric)))
    return worst


def clip_global_norm(grads: Sequence[np.ndarray], max_norm: float) -> float:
    """
    Scale ``grads`` in place so that their joint L2 norm does not exceed ``max_norm``.

    :return: The factor applied (1.0 when under the threshold).
    """
    if max_norm <= 0:
        raise ValueError(f'max_norm must be positive, got {max_norm}')
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if norm <= max_norm:
        return 1.0
    factor = max_norm / norm
    for g in grads:
        g *= factor
    return factor


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    s: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray], **kwargs) -> 'AdamState':
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            s={k: np.zeros_like(v) for k, v in params.items()},
            **kwargs,
        )

    def copy(self) -> 'AdamState':
        return AdamState(
            m={k: v.copy() for k, v in self.m.items()},
            s={k: v.copy() for k, v in self.s.items()},
            t=self.t,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
        )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> None:
    """
    Bias-corrected Adam update in place; weight decay is an L2 term added to the gradient.

    :param params: Parameter arrays, updated in place.
    :param grads: Gradients keyed like ``params``.
    :param state: Moment accumulators and step counter.
    :param lr: Learning rate.
    :param weight_decay: L2 coefficient.
    :return:
    """
    if lr <= 0:
        raise ValueError(f'Learning rate must be positive, got {lr}')
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for name, param in params.items():
        g = grads[name]
        if g.shape != param.shape:
            raise ShapeError(f'adam_step: gradient {g.shape} does not match parameter {name} {param.shape}')
        if weight_decay:
            g = g + weight_decay * param
        m = state.m[name]
        s = state.s[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        s *= state.beta2
        s += (1.0 - state.beta2) * g * g
        param -= lr * (m / c1) / (np.sqrt(s / c2) + state.eps)
