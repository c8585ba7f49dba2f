"""Reverse-mode autodiff on numpy arrays.

A Tensor wraps an ndarray plus the closure that routes its output gradient
back to its parents. backward() runs an iterative topological sort so deep
graphs never hit the recursion limit. Gradients accumulate across calls;
callers zero them between steps.
"""

from __future__ import annotations

import contextlib

import numpy as np

from pointcast.errors import GradientError, ShapeError

# Module-level switch so no_grad() can turn taping off for eval passes.
_GRAD_ENABLED = True

# Numeric width for every tensor created afterwards. 64-bit is the default
# (tests and gradchecks depend on it); training runs may opt into 32-bit.
_DEFAULT_DTYPE = np.float64

_DTYPE_NAMES = {"float64": np.float64, "float32": np.float32}


def set_default_dtype(name: str):
    global _DEFAULT_DTYPE
    if name not in _DTYPE_NAMES:
        raise ValueError(f"dtype must be one of {sorted(_DTYPE_NAMES)}, got {name!r}")
    _DEFAULT_DTYPE = _DTYPE_NAMES[name]


def default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def using_dtype(name: str):
    """Run a block under the given numeric width, then restore."""
    global _DEFAULT_DTYPE
    prev = _DEFAULT_DTYPE
    set_default_dtype(name)
    try:
        yield
    finally:
        _DEFAULT_DTYPE = prev


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad) and _GRAD_ENABLED
        self.grad = None
        self._parents = ()
        self._backward_fn = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad}{tag})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.data.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        g = np.asarray(g, dtype=self.data.dtype)
        if g.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match tensor shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad = self.grad + g

    def backward(self):
        """Backpropagate from a scalar. Seeds with 1.0 and walks the graph once."""
        if self.data.size != 1:
            raise GradientError(
                f"backward() requires a scalar output, got shape {self.data.shape}"
            )
        if not self.requires_grad:
            raise GradientError("backward() called on a tensor that does not require grad")

        order = _topo_order(self)
        self._accumulate(np.ones_like(self.data))
        for node in order:
            if node._backward_fn is None or node.grad is None:
                continue
            node._backward_fn(node.grad)


def _topo_order(root: Tensor):
    """Reverse topological order, iterative to survive long chains."""
    order = []
    visited = set()
    # Stack entries: (node, parents_pushed)
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    order.reverse()
    return order


def make_op(out_data, parents, backward_fn, name: str = ""):
    """Wrap an op result. Tapes only if grad is enabled and a parent needs it."""
    out = Tensor(out_data, name=name)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
