"""Dense float64 tensors and the tape that records primitive applications.

A forward pass runs inside a `with Tape() as tape:` block; primitives record
one entry per application, and `backward` walks the records once in reverse,
accumulating gradients into every tensor that requires them.  Tapes nest per
thread; a tensor's data is immutable by convention during a forward pass --
only optimizer updates and finite-difference probes write to it.
"""
from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

from .errors import NonScalarLoss

# Maps the output gradient to one gradient (or None) per recorded input.
Pullback = Callable[[np.ndarray], Sequence]


class Tensor:
    """A dense float64 array plus an optional accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    """A tensor that never receives gradients (inputs, targets, masks)."""
    return Tensor(data, requires_grad=False)


_LOCAL = threading.local()


def _stack() -> list:
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def active_tape() -> "Tape | None":
    stack = _stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of primitive applications from one forward pass."""

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], Pullback]] = []

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _stack().pop()
        assert popped is self, "tape stack corrupted"

    def record(self, output: Tensor, inputs: tuple[Tensor, ...], pullback: Pullback) -> None:
        self._records.append((output, inputs, pullback))

    def __len__(self) -> int:
        return len(self._records)


def backward(loss: Tensor, tape: Tape, params=None, *, free_intermediates: bool = True) -> None:
    """Accumulate d(loss)/d(tensor) into `.grad` along the tape, reversed.

    Each record is visited exactly once.  When `free_intermediates` is true,
    gradients of tensors outside `params` are dropped afterwards so only
    parameter gradients survive the call.
    """
    if loss.size != 1:
        raise NonScalarLoss(f"loss must be scalar, got shape {loss.shape}")
    loss.grad = np.ones_like(loss.data)
    for output, inputs, pullback in reversed(tape._records):
        out_grad = output.grad
        if out_grad is None:
            continue
        grads = pullback(out_grad)
        for tensor, grad in zip(inputs, grads):
            if grad is None or not tensor.requires_grad:
                continue
            if tensor.grad is None:
                tensor.grad = np.zeros_like(tensor.data)
            tensor.grad += grad
    if free_intermediates:
        keep = {id(t) for t in params.tensors()} if params is not None else set()
        for output, _, _ in tape._records:
            if id(output) not in keep:
                output.grad = None
