"""
Differentiable operations on Tensor.

No broadcasting: binary ops need identical shapes and alignment goes through
reshape / tile. Every op returns a new Tensor and, inside an active Graph,
records the closure that maps the output gradient to input gradients.
"""

import math
from typing import Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, default_dtype, make_result

Seed = Union[int, np.random.Generator]


# -- factories -------------------------------------------------------------

def _check_shape(shape) -> tuple:
    shape = tuple(int(s) for s in shape)
    if not shape:
        raise ShapeError('shape must have at least one dimension')
    if any(s < 1 for s in shape):
        raise ShapeError(f'all dimensions must be >= 1, got {shape}')
    return shape


def zeros(shape, *, requires_grad=False, dtype=None, name=None) -> Tensor:
    shape = _check_shape(shape)
    return Tensor(np.zeros(shape, dtype=dtype or default_dtype()), requires_grad, name=name)


def full(shape, value: float, *, requires_grad=False, dtype=None, name=None) -> Tensor:
    shape = _check_shape(shape)
    if not math.isfinite(value):
        raise ValueError(f'constant fill value must be finite, got {value}')
    return Tensor(np.full(shape, value, dtype=dtype or default_dtype()), requires_grad, name=name)


def uniform(shape, seed: Seed, low: float = -1.0, high: float = 1.0, *,
            requires_grad=False, dtype=None, name=None) -> Tensor:
    """Uniform fill; an int seed is reproducible, a Generator continues its stream."""
    shape = _check_shape(shape)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    data = rng.uniform(low, high, size=shape).astype(dtype or default_dtype())
    return Tensor(data, requires_grad, name=name)


def init_tensor(shape, mode: str = 'zeros', *, value: float = 0.0, seed: Seed = 0,
                low: float = -1.0, high: float = 1.0, requires_grad=False, dtype=None,
                name=None) -> Tensor:
    if mode == 'zeros':
        return zeros(shape, requires_grad=requires_grad, dtype=dtype, name=name)
    if mode == 'constant':
        return full(shape, value, requires_grad=requires_grad, dtype=dtype, name=name)
    if mode == 'uniform':
        return uniform(shape, seed, low, high, requires_grad=requires_grad, dtype=dtype, name=name)
    raise ValueError(f'unknown init mode {mode!r}')


# -- elementwise -----------------------------------------------------------

def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f'{op}: shape mismatch {a.shape} vs {b.shape}')


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('add', a, b)
    return make_result('add', a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('sub', a, b)
    return make_result('sub', a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('mul', a, b)
    a_data, b_data = a.data, b.data
    return make_result('mul', a_data * b_data, (a, b), lambda g: (g * b_data, g * a_data))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return make_result('relu', np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,))


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return make_result('scale', a.data * a.dtype.type(factor), (a,), lambda g: (g * factor,))


def elementwise(op: str, a: Tensor, b: Optional[Tensor] = None) -> Tensor:
    if op == 'relu':
        if b is not None:
            raise ValueError('relu takes a single operand')
        return relu(a)
    if b is None:
        raise ValueError(f'{op} needs two operands')
    if op == 'add':
        return add(a, b)
    if op == 'sub':
        return sub(a, b)
    if op == 'mul':
        return mul(a, b)
    raise ValueError(f'unknown elementwise op {op!r}')


# -- linear algebra --------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f'matmul expects 2-D operands, got {a.shape} and {b.shape}')
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f'matmul: inner dimensions differ {a.shape} vs {b.shape}')
    a_data, b_data = a.data, b.data
    return make_result('matmul', a_data @ b_data, (a, b),
                       lambda g: (g @ b_data.T, a_data.T @ g))


def conv2d(x: Tensor, kernel: Tensor) -> Tensor:
    """Same-padded stride-1 convolution of an HxWxCin map with a kxkxCinxCout kernel."""
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeError(f'conv2d expects HxWxC input and kxkxCinxCout kernel, got {x.shape}, {kernel.shape}')
    k = kernel.shape[0]
    if kernel.shape[1] != k:
        raise ShapeError(f'conv2d kernel must be square, got {kernel.shape[:2]}')
    if k % 2 == 0:
        raise ShapeError(f'conv2d kernel size must be odd, got {k}')
    height, width, channels = x.shape
    if kernel.shape[2] != channels:
        raise ShapeError(f'conv2d channel mismatch: input has {channels}, kernel expects {kernel.shape[2]}')
    out_channels = kernel.shape[3]
    pad = (k - 1) // 2

    padded = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0)))
    # (H, W, Cin, k, k) -> (H*W, k*k*Cin) in the kernel's (ky, kx, cin) order
    windows = sliding_window_view(padded, (k, k), axis=(0, 1))
    cols = windows.transpose(0, 1, 3, 4, 2).reshape(height * width, k * k * channels)
    flat_kernel = kernel.data.reshape(k * k * channels, out_channels)
    out = (cols @ flat_kernel).reshape(height, width, out_channels)

    def backward(g):
        g2 = g.reshape(height * width, out_channels)
        grad_kernel = (cols.T @ g2).reshape(kernel.shape)
        grad_cols = (g2 @ flat_kernel.T).reshape(height, width, k, k, channels)
        grad_padded = np.zeros_like(padded)
        for ky in range(k):
            for kx in range(k):
                grad_padded[ky:ky + height, kx:kx + width, :] += grad_cols[:, :, ky, kx, :]
        grad_x = grad_padded[pad:pad + height, pad:pad + width, :]
        return grad_x, grad_kernel

    return make_result('conv2d', out, (x, kernel), backward)


# -- reductions and loss ---------------------------------------------------

def reduce(op: str, a: Tensor) -> Tensor:
    if a.size == 0:
        raise ShapeError(f'{op} of an empty tensor')
    shape, dtype = a.shape, a.dtype
    if op == 'sum':
        return make_result('sum', np.asarray(a.data.sum(), dtype=dtype), (a,),
                           lambda g: (np.full(shape, g, dtype=dtype),))
    if op == 'mean':
        n = a.size
        return make_result('mean', np.asarray(a.data.mean(), dtype=dtype), (a,),
                           lambda g: (np.full(shape, g / n, dtype=dtype),))
    raise ValueError(f'unknown reduction {op!r}')


def sum_all(a: Tensor) -> Tensor:
    return reduce('sum', a)


def mean(a: Tensor) -> Tensor:
    return reduce('mean', a)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute deviation; the subgradient at a zero residual is 0."""
    _same_shape('l1_loss', pred, target)
    if target.requires_grad:
        raise ValueError('l1_loss target must not carry a gradient')
    if pred.size == 0:
        raise ShapeError('l1_loss of empty tensors')
    diff = pred.data - target.data.astype(pred.dtype, copy=False)
    n = pred.size
    value = np.asarray(np.abs(diff).mean(), dtype=pred.dtype)
    return make_result('l1_loss', value, (pred, target),
                       lambda g: (np.sign(diff) * (g / n), None))


# -- shape plumbing --------------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    original = a.shape
    return make_result('reshape', a.data.reshape(shape), (a,), lambda g: (g.reshape(original),))


def tile(a: Tensor, lead) -> Tensor:
    """Repeat ``a`` along new leading axes: output shape is ``lead + a.shape``."""
    lead = tuple(int(n) for n in lead)
    if not lead:
        return a
    data = np.broadcast_to(a.data, lead + a.shape).copy()
    axes = tuple(range(len(lead)))
    return make_result('tile', data, (a,), lambda g: (g.sum(axis=axes),))


def index(a: Tensor, key) -> Tensor:
    """``a[key]`` for slices and integer index arrays; gradients scatter-add back."""
    key = key if isinstance(key, tuple) else (key,)
    basic = all(isinstance(k, (slice, int, np.integer)) for k in key)
    shape, dtype = a.shape, a.dtype
    out = a.data[key]
    if basic:
        out = out.copy()

    def backward(g):
        grad = np.zeros(shape, dtype=dtype)
        if basic:
            grad[key] += g
        else:
            np.add.at(grad, key, g)
        return (grad,)

    return make_result('index', out, (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError('concat of an empty sequence')
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or t.shape[:axis] + t.shape[axis + 1:] != tensors[0].shape[:axis] + tensors[0].shape[axis + 1:]:
            raise ShapeError(f'concat: incompatible shapes {tensors[0].shape} and {t.shape} on axis {axis}')
    if len(tensors) == 1:
        return tensors[0]
    dtype = np.result_type(*[t.dtype for t in tensors])
    data = np.concatenate([t.data.astype(dtype, copy=False) for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_result('concat', data, tuple(tensors), backward)
