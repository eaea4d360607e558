"""Differentiable primitives over Tensor, recorded on the active tape.

Every primitive validates shapes, computes with numpy in double precision,
and registers a pullback mapping the output gradient to input gradients.
Broadcasting is deliberately restricted to bias addition (matrix + row
vector); everything else requires exact shape agreement.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeMismatch
from .tensor import Tensor, active_tape


def _apply(inputs: Sequence[Tensor], out_data: np.ndarray, pullback) -> Tensor:
    out = Tensor(out_data)
    out.requires_grad = any(t.requires_grad for t in inputs)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape.record(out, tuple(inputs), pullback)
    return out


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def pull(g):
        return g @ bd.T, ad.T @ g

    return _apply((a, b), ad @ bd, pull)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeMismatch(f"transpose: expected a matrix, got {a.shape}")
    return _apply((a,), a.data.T, lambda g: (g.T,))


def _bias_like(a: Tensor, b: Tensor) -> bool:
    return a.data.ndim == 2 and (
        b.shape == (a.shape[1],) or b.shape == (1, a.shape[1])
    )


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; the second operand may be a row-vector bias."""
    if a.shape == b.shape:
        pull = lambda g: (g, g)
    elif _bias_like(a, b):
        bshape = b.shape

        def pull(g):
            gb = g.sum(axis=0)
            return g, gb.reshape(bshape)
    else:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")
    return _apply((a, b), a.data + b.data, pull)


def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise difference; same operand rules as add."""
    if a.shape == b.shape:
        pull = lambda g: (g, -g)
    elif _bias_like(a, b):
        bshape = b.shape

        def pull(g):
            gb = -g.sum(axis=0)
            return g, gb.reshape(bshape)
    else:
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}")
    return _apply((a, b), a.data - b.data, pull)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    return _apply((a, b), ad * bd, lambda g: (g * bd, g * ad))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ShapeMismatch("concat: no operands")
    ndim = tensors[0].data.ndim
    if not 0 <= axis < ndim:
        raise ShapeMismatch(f"concat: axis {axis} out of range for ndim {ndim}")
    for t in tensors[1:]:
        if t.data.ndim != ndim or any(
            t.shape[d] != tensors[0].shape[d] for d in range(ndim) if d != axis
        ):
            raise ShapeMismatch(
                f"concat axis {axis}: {[t.shape for t in tensors]}"
            )
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def pull(g):
        return tuple(np.split(g, splits, axis=axis))

    return _apply(tuple(tensors), np.concatenate([t.data for t in tensors], axis=axis), pull)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    if not 0 <= axis < a.data.ndim:
        raise ShapeMismatch(f"slice: axis {axis} out of range for shape {a.shape}")
    if not 0 <= start < stop <= a.shape[axis]:
        raise ShapeMismatch(
            f"slice: [{start}:{stop}] outside axis {axis} of shape {a.shape}"
        )
    index = tuple(
        slice(start, stop) if d == axis else slice(None) for d in range(a.data.ndim)
    )
    ashape = a.shape

    def pull(g):
        full = np.zeros(ashape)
        full[index] = g
        return (full,)

    return _apply((a,), a.data[index].copy(), pull)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    shape = tuple(int(d) for d in shape)
    if any(d < 1 for d in shape) or int(np.prod(shape)) != a.size:
        raise ShapeMismatch(f"reshape: {a.shape} -> {shape}")
    ashape = a.shape
    return _apply((a,), a.data.reshape(shape), lambda g: (g.reshape(ashape),))


def sigmoid(a: Tensor) -> Tensor:
    y = _stable_sigmoid(a.data)
    return _apply((a,), y, lambda g: (g * y * (1.0 - y),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _apply((a,), y, lambda g: (g * (1.0 - y * y),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _apply((a,), np.where(mask, a.data, 0.0), lambda g: (g * mask,))


def softmax(a: Tensor, axis: int) -> Tensor:
    if not 0 <= axis < a.data.ndim:
        raise ShapeMismatch(f"softmax: axis {axis} out of range for shape {a.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def pull(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - inner),)

    return _apply((a,), y, pull)


def sum(a: Tensor) -> Tensor:
    """Full reduction to a one-element tensor."""
    ashape = a.shape
    return _apply((a,), np.array([a.data.sum()]), lambda g: (np.full(ashape, g[0]),))


def mean(a: Tensor) -> Tensor:
    """Full reduction to a one-element tensor."""
    ashape, n = a.shape, a.size
    return _apply((a,), np.array([a.data.mean()]), lambda g: (np.full(ashape, g[0] / n),))


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference over all entries."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"l1_loss: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = a.size
    sign = np.sign(diff)

    def pull(g):
        scaled = g[0] * sign / n
        return scaled, -scaled

    return _apply((a, b), np.array([np.abs(diff).mean()]), pull)


def bce_loss(logits: Tensor, targets: Tensor) -> Tensor:
    """Mean binary cross-entropy of sigmoid(logits) against targets in [0, 1].

    Computed in the numerically stable logit form
    max(x, 0) - x*t + log(1 + exp(-|x|)).
    """
    if logits.shape != targets.shape:
        raise ShapeMismatch(f"bce_loss: {logits.shape} vs {targets.shape}")
    x, t = logits.data, targets.data
    per = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    n = logits.size
    p = _stable_sigmoid(x)

    def pull(g):
        return g[0] * (p - t) / n, g[0] * (-x) / n

    return _apply((logits, targets), np.array([per.mean()]), pull)
