"""Named parameter storage, seeded initialization, and the finite-difference oracle."""
from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from .tensor import Tape, Tensor, backward


class ParamStore:
    """Insertion-ordered map of parameter name -> learnable Tensor."""

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, values) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        tensor = Tensor(np.array(values, dtype=np.float64), requires_grad=True)
        self._tensors[name] = tensor
        return tensor

    def add_uniform(self, name: str, shape: tuple[int, ...], rng: np.random.Generator,
                    scale: float) -> Tensor:
        return self.add(name, rng.uniform(-scale, scale, size=shape))

    def add_zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._tensors.items())

    def tensors(self) -> Iterator[Tensor]:
        return iter(self._tensors.values())

    def n_entries(self) -> int:
        return int(np.sum([t.size for t in self._tensors.values()], dtype=np.int64))

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.grad = np.zeros_like(tensor.data)

    def grad(self, name: str) -> np.ndarray:
        tensor = self._tensors[name]
        if tensor.grad is None:
            return np.zeros_like(tensor.data)
        return tensor.grad

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._tensors) - set(state)
        extra = set(state) - set(self._tensors)
        if missing or extra:
            raise ValueError(
                f"parameter names differ (missing={sorted(missing)}, extra={sorted(extra)})"
            )
        for name, tensor in self._tensors.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != tensor.data.shape:
                raise ValueError(
                    f"shape of {name!r}: stored {arr.shape} vs expected {tensor.data.shape}"
                )
            tensor.data[...] = arr


LossFn = Callable[[ParamStore], Tensor]


def fd_report(f: LossFn, params: ParamStore, eps: float = 1e-5) -> dict[str, float]:
    """Per-parameter max relative error of analytic vs central-difference gradients.

    The error metric is |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
    maximized over the entries of each parameter.  `f` must be a pure function
    of the parameter values.
    """
    with Tape() as tape:
        loss = f(params)
    params.zero_grad()
    backward(loss, tape, params)
    analytic = {name: params.grad(name).copy() for name in params.names()}

    report: dict[str, float] = {}
    for name, tensor in params.items():
        flat = tensor.data.reshape(-1)
        aflat = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            plus = f(params).item()
            flat[i] = orig - eps
            minus = f(params).item()
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * eps)
            denom = max(1e-8, abs(aflat[i]) + abs(numeric))
            worst = max(worst, abs(aflat[i] - numeric) / denom)
        report[name] = worst
    return report


def fd_check(f: LossFn, params: ParamStore, eps: float = 1e-5) -> float:
    """Max relative gradient error over every entry of every parameter."""
    report = fd_report(f, params, eps=eps)
    return max(report.values(), default=0.0)
