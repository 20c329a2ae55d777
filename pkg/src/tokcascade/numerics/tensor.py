"""Dense float64 tensors and the recorded operation graph for reverse mode.

Every differentiable operation appends an OpRecord to the active Graph (if
one is open and an input is tracked).  Records are appended in execution
order, which is already a topological order, so backward() is a single
reverse sweep over the list.  Without an active graph the same operations
run forward-only, which is the inference fast path.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError, DimensionError

GradFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """A dense float64 array, row-major, optionally tracked for gradients.

    Tensors are treated as immutable once created; the optimizers are the
    single writer that swaps parameter data in place between graphs.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        # asarray with order="C" keeps 0-d shapes (ascontiguousarray promotes them)
        self.data = np.asarray(data, dtype=np.float64, order="C")
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of size {self.data.size}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


@dataclass
class OpRecord:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    grad_fn: GradFn


_state = threading.local()


def _graph_stack() -> list["Graph"]:
    stack = getattr(_state, "stack", None)
    if stack is None:
        stack = []
        _state.stack = stack
    return stack


def active_graph() -> "Graph | None":
    stack = _graph_stack()
    return stack[-1] if stack else None


class Graph:
    """Topologically ordered op records; context manager activates recording.

    Construction and backward are single-threaded per instance; separate
    instances on separate threads do not share state.
    """

    def __init__(self):
        self.nodes: list[OpRecord] = []

    def __enter__(self) -> "Graph":
        _graph_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        stack = _graph_stack()
        if not stack or stack[-1] is not self:
            raise ContractError("graph exited out of order")
        stack.pop()
        return False

    def backward(self, loss: Tensor, params: Iterable[Tensor] | None = None) -> None:
        """Accumulate d(loss)/d(tensor) into .grad for tracked leaves.

        loss must be a scalar produced inside this graph.  Tensors in
        `params` that the loss does not depend on get an explicit zero
        gradient so callers can treat .grad as always present.
        """
        if loss.data.size != 1:
            raise ContractError("backward requires a scalar loss")
        produced = {id(rec.output) for rec in self.nodes}
        if id(loss) not in produced:
            raise ContractError("loss tensor was not produced in this graph")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        holders: dict[int, Tensor] = {id(loss): loss}
        for rec in reversed(self.nodes):
            out_grad = grads.pop(id(rec.output), None)
            holders.pop(id(rec.output), None)
            if out_grad is None:
                continue
            input_grads = rec.grad_fn(out_grad)
            for tensor, g in zip(rec.inputs, input_grads):
                if g is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
                    holders[key] = tensor

        for key, g in grads.items():
            tensor = holders[key]
            if key in produced:
                continue  # intermediate value, not a leaf
            tensor.grad = g if tensor.grad is None else tensor.grad + g

        if params is not None:
            for p in params:
                if p.requires_grad and p.grad is None:
                    p.grad = np.zeros_like(p.data)


def record(op: str, inputs: Sequence[Tensor], output: Tensor, grad_fn: GradFn) -> Tensor:
    """Register an op on the active graph when any input is tracked."""
    graph = active_graph()
    if graph is not None and any(t.requires_grad for t in inputs):
        output.requires_grad = True
        graph.nodes.append(OpRecord(op, tuple(inputs), output, grad_fn))
    return output


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def check_matmul_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul requires matrices, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
    if a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(f"batch dimensions disagree: {a.shape} @ {b.shape}")
