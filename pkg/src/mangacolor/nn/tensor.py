"""A minimal reverse-mode autodiff tensor over float32 numpy arrays.

Each operation records a backward closure and its parent tensors; calling
``backward()`` on a scalar walks the graph in reverse topological order and
accumulates gradients into every tensor that requires them. Gradients are
accumulated with ``+=`` so fan-out (one tensor feeding several ops) is
handled naturally.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
    ):
        data = np.asarray(data, dtype=np.float32)
        self.data = data if data.flags["C_CONTIGUOUS"] else np.ascontiguousarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def detach(self) -> "Tensor":
        """A grad-free tensor sharing this tensor's values."""
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from a scalar tensor through the recorded graph."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def needs_graph(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


def make(data, parents: Iterable[Tensor], backward) -> Tensor:
    """Result tensor; the backward closure is kept only if a parent needs grads."""
    parents = tuple(parents)
    if needs_graph(*parents):
        return Tensor(data, parents=parents, backward=backward)
    return Tensor(data)
