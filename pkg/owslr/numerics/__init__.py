"""
Minimal reverse-mode tensor engine and Adam optimizer.
"""

from .gradcheck import GradCheckResult, check_gradients, relative_error
from .ops import (
    add, concat, conv2d, elementwise, full, index, init_tensor, l1_loss, matmul, mean,
    reduce, relu, reshape, scale, sub, sum_all, tile, uniform, zeros, mul,
)
from .optim import AdamState, OptimizerError, adam_step
from .tensor import (
    Graph, GraphError, NonFiniteError, NumericsError, ShapeError, Tensor, active_graph,
    backward, default_dtype, precision,
)

__all__ = [
    'AdamState', 'GradCheckResult', 'Graph', 'GraphError', 'NonFiniteError', 'NumericsError',
    'OptimizerError', 'ShapeError', 'Tensor', 'active_graph', 'adam_step', 'add', 'backward',
    'check_gradients', 'concat', 'conv2d', 'default_dtype', 'elementwise', 'full', 'index',
    'init_tensor', 'l1_loss', 'matmul', 'mean', 'mul', 'precision', 'reduce', 'relative_error',
    'relu', 'reshape', 'scale', 'sub', 'sum_all', 'tile', 'uniform', 'zeros',
]
