"""
Reverse-mode differentiable tensors.

Operations are recorded define-by-run on the active Graph. Work done outside a
``with Graph():`` block is not tracked, which is how inference runs.
"""

import logging
import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class NumericsError(Exception):
    pass


class ShapeError(NumericsError, ValueError):
    pass


class NonFiniteError(NumericsError, ArithmeticError):
    pass


class GraphError(NumericsError, RuntimeError):
    pass


_local = threading.local()


def default_dtype():
    """Storage dtype used by tensor factories on this thread."""
    return getattr(_local, 'dtype', np.float32)


@contextmanager
def precision(dtype):
    """Temporarily switch the factory dtype, e.g. to float64 for gradient checks."""
    previous = default_dtype()
    _local.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _local.dtype = previous


def _graph_stack():
    stack = getattr(_local, 'graphs', None)
    if stack is None:
        stack = _local.graphs = []
    return stack


def active_graph() -> Optional['Graph']:
    stack = _graph_stack()
    return stack[-1] if stack else None


def ensure_finite(op: str, data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        bad = int(np.size(data) - np.count_nonzero(np.isfinite(data)))
        raise NonFiniteError(f'{op} produced {bad} non-finite value(s)')


class Tensor:
    """Dense array plus optional gradient; ``shape == data.shape`` at all times."""

    __slots__ = ('data', 'requires_grad', 'grad', 'name', '_node')

    def __init__(self, data, requires_grad: bool = False, *, dtype=None, name: str = None):
        if dtype is None and isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
            array = data
        else:
            array = np.asarray(data, dtype=dtype or default_dtype())
        ensure_finite(name or 'tensor', array)
        self.data = array
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._node = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float('nan')

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> 'Tensor':
        return Tensor(self.data, requires_grad=False, name=self.name)

    def __repr__(self):
        label = f' name={self.name!r}' if self.name else ''
        return f'Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})'


class Node:
    __slots__ = ('op', 'inputs', 'output', 'backward', 'graph')

    def __init__(self, op, inputs, output, backward, graph):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward
        self.graph = graph


class Graph:
    """Ordered record of executed operations; each graph supports one backward pass."""

    def __init__(self):
        self.nodes = []
        self.consumed = False

    def __enter__(self):
        if self.consumed:
            raise GraphError('graph was already used for backward; build a new one')
        _graph_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _graph_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor,
               backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> None:
        if self.consumed:
            raise GraphError('cannot record on a graph after backward')
        node = Node(op, tuple(inputs), output, backward, self)
        output._node = node
        self.nodes.append(node)


def make_result(op: str, data: np.ndarray, inputs: Sequence[Tensor],
                backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Tensor:
    """Wrap an op's output, recording it when a graph is active and any input is tracked."""
    ensure_finite(op, data)
    out = Tensor(data)
    graph = active_graph()
    if graph is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        graph.record(op, inputs, out, backward)
    return out


def backward(graph: Graph, loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tracked tensor reachable from loss."""
    if graph.consumed:
        raise GraphError('backward already ran on this graph')
    if loss.ndim != 0:
        raise ShapeError(f'loss must be a scalar, got shape {loss.shape}')
    graph.consumed = True

    if not loss.requires_grad or loss._node is None:
        logger.debug('backward on an untracked loss; no gradients written')
        return
    if loss._node.graph is not graph:
        raise GraphError('loss was not recorded on this graph')

    pending = {id(loss): (loss, np.ones_like(loss.data))}
    for node in reversed(graph.nodes):
        entry = pending.pop(id(node.output), None)
        if entry is None:
            continue
        _, grad = entry
        node.output.grad = grad
        for tensor, input_grad in zip(node.inputs, node.backward(grad)):
            if input_grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in pending:
                pending[key] = (tensor, pending[key][1] + input_grad)
            else:
                pending[key] = (tensor, input_grad)

    # What is left are leaves: parameters and tracked inputs
    for tensor, grad in pending.values():
        grad = grad.astype(tensor.dtype, copy=False)
        tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
