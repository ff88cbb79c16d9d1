"""
Separable cubic-convolution resampling.

Source coordinate of output pixel i is (i + 0.5) * n_in / n_out - 0.5, taps
are clamped to the border, and the kernel is not widened when shrinking.
"""

import numpy as np

from .buffer import ImageBuffer, ImageShapeError

CUBIC_A = -0.5


def cubic_weight(x, a: float = CUBIC_A):
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def resize_weights(n_in: int, n_out: int, a: float = CUBIC_A) -> np.ndarray:
    """Dense n_out x n_in matrix whose row i holds the taps of output sample i."""
    if n_in < 1 or n_out < 1:
        raise ImageShapeError(f'resize dimensions must be >= 1, got {n_in} -> {n_out}')
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(np.int64)
    matrix = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    for tap in range(-1, 3):
        idx = base + tap
        w = cubic_weight(src - idx, a)
        np.add.at(matrix, (rows, np.clip(idx, 0, n_in - 1)), w)
    return matrix


def bicubic_resize(img: ImageBuffer, out_h: int, out_w: int) -> ImageBuffer:
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1:
        raise ImageShapeError(f'output size must be at least 1x1, got {out_h}x{out_w}')
    wy = resize_weights(img.height, out_h)
    wx = resize_weights(img.width, out_w)
    out = np.einsum('ij,jkc->ikc', wy, img.data)
    out = np.einsum('lk,ikc->ilc', wx, out)
    return ImageBuffer.clamped(out)
