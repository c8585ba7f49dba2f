"""Named parameter registry and weight initializers."""

from __future__ import annotations

import numpy as np

from pointcast.diffcore.tensor import Tensor
from pointcast.errors import ShapeError, ValidationError


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class ModelParams:
    """Ordered name -> Tensor map. Order is insertion order and is part of
    the checkpoint contract, so registration order must be deterministic."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, values: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValidationError(f"duplicate parameter name: {name}")
        t = Tensor(values, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def tensors(self):
        return list(self._params.values())

    def items(self):
        return list(self._params.items())

    def n_elements(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def restore(self, snap: dict[str, np.ndarray]):
        if set(snap.keys()) != set(self._params.keys()):
            raise ValidationError("snapshot parameter names do not match the model")
        for name, values in snap.items():
            t = self._params[name]
            if values.shape != t.data.shape:
                raise ShapeError(
                    f"snapshot shape {values.shape} does not match {name} {t.data.shape}"
                )
            t.data = np.array(values, dtype=t.data.dtype)
